"""Experiment plans, per-run rows and CSV/JSON reports."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CWCError, PlanInvalid, Unreachable
from .generators import random_fat_graph, random_graph, random_wheel, ring_of_cliques
from .measure import REGISTRY, measure
from .topology import Topology, build_topology

COLUMNS = ["algo", "n", "s", "b_c", "b_l", "kappa", "g", "rounds", "analytic_bound", "lower_bound", "pass", "error"]

GENERATORS = {
    "random_wheel": lambda p: random_wheel(int(p["seed"]), int(p["n"])),
    "random_fat_graph": lambda p: random_fat_graph(int(p["seed"]), int(p["n"]), int(p["s"])),
    "random_graph": lambda p: random_graph(int(p["seed"]), int(p["n"])),
    "ring_of_cliques": lambda p: ring_of_cliques(int(p["cliques"]), int(p["size"]), int(p["s"]),
                                                 int(p.get("cloud_bw", 1))),
}


@dataclass
class Run:
    algo: str
    topology: dict
    params: dict
    seed: int

    def build(self) -> Topology:
        spec = self.topology
        if "generator" in spec:
            return GENERATORS[spec["generator"]](spec)
        return build_topology(spec)


@dataclass
class ExperimentPlan:
    runs: list[Run] = field(default_factory=list)
    output: str | None = None

    @classmethod
    def from_json(cls, doc: dict, seed_override: int | None = None) -> "ExperimentPlan":
        if not isinstance(doc, dict) or not isinstance(doc.get("runs", []), list):
            raise PlanInvalid("plan must be an object with a runs list")
        runs = []
        for k, entry in enumerate(doc.get("runs", [])):
            if not isinstance(entry, dict):
                raise PlanInvalid(f"run {k} is not an object")
            algo = entry.get("algo")
            if algo not in REGISTRY:
                raise PlanInvalid(f"run {k}: unknown algorithm {algo!r}")
            topo = entry.get("topology")
            if not isinstance(topo, dict):
                raise PlanInvalid(f"run {k}: topology must be an object")
            if "generator" in topo and topo["generator"] not in GENERATORS:
                raise PlanInvalid(f"run {k}: unknown generator {topo['generator']!r}")
            if "seed" not in entry:
                raise PlanInvalid(f"run {k}: seed must be explicit")
            reps = int(entry.get("repetitions", 1))
            if reps < 1:
                raise PlanInvalid(f"run {k}: repetitions must be positive")
            base = int(entry["seed"]) if seed_override is None else seed_override
            params = {key: v for key, v in entry.items() if key not in ("algo", "topology", "seed", "repetitions")}
            for r in range(reps):
                runs.append(Run(algo, topo, params, base + r))
        return cls(runs, doc.get("output"))

    @classmethod
    def load(cls, path: str | Path, seed_override: int | None = None) -> "ExperimentPlan":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise PlanInvalid(f"cannot read plan {path}: {exc}") from exc
        return cls.from_json(doc, seed_override)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _span(values: list[int]) -> str:
    if not values:
        return ""
    lo, hi = min(values), max(values)
    return str(lo) if lo == hi else f"{lo}:{hi}"


def execute(run: Run) -> dict[str, str]:
    """One report row; run errors are recorded rather than raised."""
    row = {c: "" for c in COLUMNS}
    row["algo"] = run.algo
    row["s"] = fmt(run.params.get("s"))
    row["kappa"] = fmt(run.params.get("kappa"))
    try:
        topo = run.build()
        row["n"] = str(topo.n)
        row["b_c"] = _span(topo.cloud)
        row["b_l"] = _span([ln.w for ln in topo.links])
        res = measure(topo, run.algo, run.params, None, run.seed)
    except CWCError as exc:
        # every flavour of "no path to the cloud" shares one label in reports
        row["error"] = "Unreachable" if isinstance(exc, Unreachable) else type(exc).__name__
        return row
    g = res.extra.get("g", run.params.get("grain"))
    row["g"] = fmt(g)
    row["kappa"] = fmt(res.extra.get("kappa", run.params.get("kappa")))
    row["rounds"] = str(res.rounds)
    row["analytic_bound"] = fmt(res.analytic_bound)
    row["lower_bound"] = fmt(res.lower_bound)
    row["pass"] = fmt(res.passed)
    return row


def run_plan(plan: ExperimentPlan, jobs: int = 1) -> list[dict[str, str]]:
    """Rows in plan order; ``jobs > 1`` runs them in worker processes."""
    if jobs > 1 and len(plan.runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(execute, plan.runs))
    return [execute(r) for r in plan.runs]


def to_csv(rows: list[dict[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def to_json(rows: list[dict[str, str]]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def violations(rows: list[dict[str, str]]) -> int:
    return sum(1 for r in rows if r["pass"] == "false")


def standard_plan() -> dict:
    """Small sweep touching every algorithm; used for golden-file determinism checks."""
    runs: list[dict] = []
    for n, bc, bl in ((8, 1, 4), (16, 2, 16)):
        w = {"mode": "wheel", "n": n, "cloud_bw": bc, "local_bw": bl}
        for s in (9, 64):
            runs.append({"algo": "cloud_write_interval", "topology": w, "s": s, "node": 0, "seed": 1})
            runs.append({"algo": "cloud_read_interval", "topology": w, "s": s, "node": 1, "seed": 2})
        runs.append({"algo": "combined_write_wheel", "topology": w, "s": 16, "op": "xor", "seed": 3})
        runs.append({"algo": "combined_write_modular", "topology": w, "s": 64, "op": "add", "grain": 8, "seed": 4})
        runs.append({"algo": "cloudcast_wheel", "topology": w, "s": 32, "seed": 5})
        runs.append({"algo": "fedsum", "topology": w, "m": 4, "modulus": 10, "seed": 6})
    for seed in (1, 2):
        rw = {"generator": "random_wheel", "n": 12, "seed": seed}
        runs.append({"algo": "cloud_write_interval", "topology": rw, "s": 64, "node": 3, "seed": seed})
        runs.append({"algo": "combined_write_wheel", "topology": rw, "s": 24, "op": "compose8", "seed": seed})
        runs.append({"algo": "quickest_write", "topology": rw, "s": 64, "node": 3, "seed": seed})
    for seed in (1, 2):
        fat = {"generator": "random_fat_graph", "n": 16, "s": 16, "seed": seed}
        runs.append({"algo": "combined_write_fat", "topology": fat, "s": 16, "op": "xor", "cover": "sparse",
                     "seed": seed})
        runs.append({"algo": "combined_write_fat", "topology": fat, "s": 16, "op": "add", "cover": "all",
                     "seed": seed})
        runs.append({"algo": "cloudcast_fat", "topology": fat, "s": 16, "seed": seed})
        runs.append({"algo": "cloud_write_cluster", "topology": fat, "s": 16, "node": 0, "seed": seed})
    for seed in (1, 2):
        gen = {"generator": "random_graph", "n": 8, "seed": seed}
        runs.append({"algo": "combined_write_generic", "topology": gen, "s": 4, "op": "matmul2", "seed": seed})
        runs.append({"algo": "quickest_caw", "topology": gen, "s": 8, "seed": seed})
        runs.append({"algo": "quickest_car", "topology": gen, "s": 8, "seed": seed})
        runs.append({"algo": "quickest_read", "topology": gen, "s": 8, "node": 1, "seed": seed})
    runs.append({"algo": "cloud_write_interval",
                 "topology": {"mode": "wheel", "n": 4, "cloud_bw": 0, "local_bw": 4}, "s": 8, "seed": 7})
    return {"runs": runs}
