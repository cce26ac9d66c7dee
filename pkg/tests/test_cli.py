import csv
import io
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

import cwcsim.measure as measure_mod
from cwcsim.cli import main
from cwcsim.report import COLUMNS, ExperimentPlan, run_plan, standard_plan, to_csv

GOLDEN = Path(__file__).parent / "golden" / "standard_sweep.csv"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def wheel_file(tmp_path):
    p = tmp_path / "w.json"
    p.write_text(json.dumps({"mode": "wheel", "n": 8, "cloud_bw": 1, "local_bw": 4}))
    return str(p)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_wheel_write_row(runner, wheel_file):
    res = runner.invoke(main, ["wheel-write", "--topology", wheel_file, "--size", "9"])
    assert res.exit_code == 0, res.output
    (row,) = _rows(res.output)
    assert list(row) == COLUMNS
    assert row["algo"] == "cloud_write_interval" and row["pass"] == "true"
    assert int(row["rounds"]) <= float(row["analytic_bound"])


@pytest.mark.parametrize("args", [
    ["wheel-read", "--size", "9", "--node", "3"],
    ["combine", "--op", "matmul2"],
    ["combine", "--op", "add", "--size", "64", "--grain", "8", "--modular"],
    ["cloudcast", "--size", "16"],
    ["quickest", "--mode", "caw", "--size", "4"],
])
def test_subcommands_pass(runner, wheel_file, args):
    res = runner.invoke(main, [args[0], "--topology", wheel_file] + args[1:])
    assert res.exit_code == 0, res.output
    assert _rows(res.output)[0]["pass"] == "true"


def test_fat_combine(runner, tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"mode": "fat", "n": 4, "s": 16, "cloud_bw": [1, 0, 2, 1],
                             "edges": [[0, 1, 16], [1, 2, 16], [2, 3, 16], [3, 0, 20]]}))
    res = runner.invoke(main, ["fat-combine", "--topology", str(p), "--op", "add", "--cover", "all"])
    assert res.exit_code == 0, res.output
    assert _rows(res.output)[0]["pass"] == "true"


def test_fedsum_json(runner):
    res = runner.invoke(main, ["fedsum", "--n", "3", "--m", "2", "--modulus", "10", "--seed", "4", "--json"])
    assert res.exit_code == 0, res.output
    (row,) = json.loads(res.output)
    assert row["algo"] == "fedsum" and row["pass"] == "true"


def test_quickest_schedule_file(runner, wheel_file, tmp_path):
    out = tmp_path / "sched.json"
    res = runner.invoke(main, ["quickest", "--topology", wheel_file, "--size", "9", "--schedule", str(out)])
    assert res.exit_code == 0, res.output
    doc = json.loads(out.read_text())
    assert doc["horizon"] == int(_rows(res.output)[0]["rounds"]) == 3


def test_invalid_inputs_exit_three(runner, wheel_file, tmp_path):
    assert runner.invoke(main, ["wheel-write", "--topology", wheel_file, "--size", "9", "--node", "99"]).exit_code == 3
    missing = str(tmp_path / "nope.json")
    assert runner.invoke(main, ["wheel-write", "--topology", missing, "--size", "9"]).exit_code == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mode": "wheel", "n": 3, "cloud_bw": 0.5}))
    assert runner.invoke(main, ["cloudcast", "--topology", str(bad), "--size", "4"]).exit_code == 3
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"runs": [{"algo": "cloud_write_interval", "topology": {"mode": "wheel", "n": 2,
                                                                                      "cloud_bw": 1}}]}))
    assert runner.invoke(main, ["sweep", "--plan", str(plan)]).exit_code == 3      # seed missing
    plan.write_text(json.dumps({"runs": [{"algo": "warp", "topology": {}, "seed": 1}]}))
    assert runner.invoke(main, ["sweep", "--plan", str(plan)]).exit_code == 3
    res = runner.invoke(main, ["wheel-write", "--topology", wheel_file, "--size", "9"], env={"CWCSIM_SEED": "x"})
    assert res.exit_code == 3


def test_malformed_command_line_exits_three(runner, wheel_file):
    assert runner.invoke(main, ["wheel-write", "--size", "9"]).exit_code == 3
    assert runner.invoke(main, ["combine", "--topology", wheel_file, "--op", "nand"]).exit_code == 3
    assert runner.invoke(main, ["teleport"]).exit_code == 3
    assert runner.invoke(main, ["--help"]).exit_code == 0


def test_empty_plan(runner, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"runs": []}))
    res = runner.invoke(main, ["sweep", "--plan", str(plan)])
    assert res.exit_code == 0
    assert res.output == ",".join(COLUMNS) + "\n"


def test_zero_cloud_plan_records_error(runner, tmp_path):
    plan = tmp_path / "plan.json"
    topo = {"mode": "wheel", "n": 4, "cloud_bw": 0, "local_bw": 4}
    plan.write_text(json.dumps({"runs": [
        {"algo": "cloud_write_interval", "topology": topo, "s": 8, "seed": 1},
        {"algo": "combined_write_wheel", "topology": topo, "op": "xor", "seed": 1},
        {"algo": "quickest_write", "topology": topo, "s": 8, "seed": 1},
    ]}))
    res = runner.invoke(main, ["sweep", "--plan", str(plan)])
    assert res.exit_code == 0, res.output
    rows = _rows(res.output)
    assert [r["error"] for r in rows] == ["Unreachable"] * 3
    assert all(r["pass"] == "" for r in rows)


def test_bound_violation_exit_two(runner, wheel_file, monkeypatch):
    monkeypatch.setattr(measure_mod, "C_WHEEL_OP", 0)
    res = runner.invoke(main, ["wheel-write", "--topology", wheel_file, "--size", "9"])
    assert res.exit_code == 2
    assert _rows(res.output)[0]["pass"] == "false"


def test_json_mirror_and_output_file(runner, tmp_path):
    out, mirror = tmp_path / "r.csv", tmp_path / "r.json"
    res = runner.invoke(main, ["sweep", "--plan", "standard", "--out", str(out), "--json-out", str(mirror)])
    assert res.exit_code == 0
    assert json.loads(mirror.read_text()) == _rows(out.read_text())


def test_seed_override():
    plan = {"runs": [{"algo": "fedsum", "topology": {"mode": "wheel", "n": 2, "cloud_bw": 1, "local_bw": 8},
                      "seed": 3, "repetitions": 2}]}
    assert [r.seed for r in ExperimentPlan.from_json(plan).runs] == [3, 4]
    assert [r.seed for r in ExperimentPlan.from_json(plan, 40).runs] == [40, 41]


def test_parallel_rows_keep_plan_order():
    plan = ExperimentPlan.from_json(standard_plan())
    assert to_csv(run_plan(plan, jobs=3)) == to_csv(run_plan(plan))


def test_standard_sweep_matches_golden(runner):
    res = runner.invoke(main, ["sweep", "--plan", "standard"])
    assert res.exit_code == 0
    assert res.output == GOLDEN.read_text()
