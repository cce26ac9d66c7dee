"""Command-line harness: single measurements and plan sweeps emitting CSV/JSON rows."""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .errors import InvalidInput
from .report import ExperimentPlan, Run, execute, run_plan, standard_plan, to_csv, to_json, violations
from .topology import load_topology

SEED_ENV = "CWCSIM_SEED"
EXIT_OK, EXIT_BOUND, EXIT_INVALID = 0, 2, 3


def effective_seed(seed: int | None) -> int | None:
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError as exc:
            raise InvalidInput(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return seed


def _emit(rows: list[dict[str, str]], as_json: bool, out: str | None = None, json_out: str | None = None) -> None:
    text = to_json(rows) if as_json else to_csv(rows)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    if json_out:
        Path(json_out).write_text(to_json(rows))


def _single(algo: str, topology: str, params: dict, seed: int, as_json: bool) -> None:
    try:
        doc = json.loads(Path(topology).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read topology {topology}: {exc}") from exc
    load_topology(topology)  # validate early so bad files exit with the invalid-input code
    row = execute(Run(algo, doc, {k: v for k, v in params.items() if v is not None}, effective_seed(seed)))
    if row["error"] and row["error"] in _INVALID_NAMES:
        raise InvalidInput(f"{algo}: {row['error']}")
    _emit([row], as_json)
    if row["pass"] == "false":
        sys.exit(EXIT_BOUND)


def _invalid_names() -> set[str]:
    from . import errors
    return {name for name, obj in vars(errors).items()
            if isinstance(obj, type) and issubclass(obj, InvalidInput)}


_INVALID_NAMES = _invalid_names()


class _Group(click.Group):
    def main(self, *args, **kwargs):
        # malformed command lines are invalid input too, not bound violations
        try:
            kwargs["standalone_mode"] = False
            return super().main(*args, **kwargs)
        except click.exceptions.Abort:
            sys.exit(1)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_INVALID)

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except InvalidInput as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INVALID)


topology_opt = click.option("--topology", required=True, type=click.Path(dir_okay=False),
                            help="Topology JSON file.")
seed_opt = click.option("--seed", default=0, show_default=True, type=int,
                        help=f"Input seed (overridden by ${SEED_ENV}).")
json_opt = click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of CSV.")


@click.group(cls=_Group)
def main() -> None:
    """Round-exact simulator of cloud-assisted networks."""


@main.command("wheel-write")
@topology_opt
@click.option("--node", default=0, show_default=True, type=int)
@click.option("--size", "s", required=True, type=int, help="File size in bits.")
@seed_opt
@json_opt
def wheel_write(topology, node, s, seed, as_json):
    """CloudWrite from one node through its cloud interval."""
    _single("cloud_write_interval", topology, {"node": node, "s": s}, seed, as_json)


@main.command("wheel-read")
@topology_opt
@click.option("--node", default=0, show_default=True, type=int)
@click.option("--size", "s", required=True, type=int, help="File size in bits.")
@seed_opt
@json_opt
def wheel_read(topology, node, s, seed, as_json):
    """CloudRead into one node through its cloud interval."""
    _single("cloud_read_interval", topology, {"node": node, "s": s}, seed, as_json)


@main.command("combine")
@topology_opt
@click.option("--op", type=click.Choice(["xor", "add", "matmul2", "compose8"]), default="xor", show_default=True)
@click.option("--size", "s", type=int, default=None, help="Operand size in bits.")
@click.option("--grain", type=int, default=None)
@click.option("--modular", is_flag=True, help="Grain-pipelined combining.")
@seed_opt
@json_opt
def combine(topology, op, s, grain, modular, seed, as_json):
    """Combined write of all node inputs on a wheel."""
    algo = "combined_write_modular" if modular else "combined_write_wheel"
    _single(algo, topology, {"op": op, "s": s, "grain": grain}, seed, as_json)


@main.command("fat-combine")
@topology_opt
@click.option("--op", type=click.Choice(["xor", "add"]), default="xor", show_default=True)
@click.option("--size", "s", type=int, default=None)
@click.option("--cover", type=click.Choice(["sparse", "all"]), default="sparse", show_default=True)
@click.option("--kappa", type=int, default=None)
@click.option("--variant", type=click.Choice(["tree", "flow"]), default="tree", show_default=True)
@seed_opt
@json_opt
def fat_combine(topology, op, s, cover, kappa, variant, seed, as_json):
    """Combined write on a fat-links graph (commutative operators)."""
    if s is None:
        s = load_topology(topology).s
    _single("combined_write_fat", topology,
            {"op": op, "s": s, "cover": cover, "kappa": kappa, "variant": variant}, seed, as_json)


@main.command("cloudcast")
@topology_opt
@click.option("--size", "s", required=True, type=int)
@click.option("--cover", type=click.Choice(["sparse", "all"]), default=None)
@click.option("--kappa", type=int, default=None)
@seed_opt
@json_opt
def cloudcast(topology, s, cover, kappa, seed, as_json):
    """Disseminate a cloud file to every node (wheel or fat-links graph)."""
    _single("cloudcast", topology, {"s": s, "cover": cover, "kappa": kappa}, seed, as_json)


@main.command("quickest")
@topology_opt
@click.option("--mode", type=click.Choice(["write", "read", "caw", "car"]), default="write", show_default=True)
@click.option("--node", default=0, show_default=True, type=int)
@click.option("--size", "s", required=True, type=int)
@click.option("--schedule", "schedule_out", type=click.Path(dir_okay=False), default=None,
              help="Also write the optimal schedule as JSON.")
@seed_opt
@json_opt
def quickest(topology, mode, node, s, schedule_out, seed, as_json):
    """Minimum-horizon schedule via max flow over time."""
    if schedule_out:
        from .measure import measure
        res = measure(load_topology(topology), f"quickest_{mode}", {"node": node, "s": s}, None,
                      effective_seed(seed))
        Path(schedule_out).write_text(json.dumps(res.output.to_json()) + "\n")
    _single(f"quickest_{mode}", topology, {"node": node, "s": s}, seed, as_json)


@main.command("fedsum")
@click.option("--n", "n", required=True, type=int, help="Number of users.")
@click.option("--m", "m", required=True, type=int, help="Vector length.")
@click.option("--modulus", required=True, type=int)
@click.option("--cloud-bw", default=2, show_default=True, type=int)
@click.option("--local-bw", default=64, show_default=True, type=int)
@seed_opt
@json_opt
def fedsum(n, m, modulus, cloud_bw, local_bw, seed, as_json):
    """Masked federated summation on a uniform wheel."""
    if n < 1:
        raise InvalidInput("n must be positive")
    doc = {"mode": "wheel", "n": n, "cloud_bw": cloud_bw, "local_bw": local_bw}
    row = execute(Run("fedsum", doc, {"m": m, "modulus": modulus}, effective_seed(seed)))
    if row["error"] in _INVALID_NAMES:
        raise InvalidInput(row["error"])
    _emit([row], as_json)
    if row["pass"] == "false":
        sys.exit(EXIT_BOUND)


@main.command("sweep")
@click.option("--plan", "plan_path", required=True,
              help="Plan JSON file, or 'standard' for the built-in plan.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output (default stdout).")
@click.option("--json-out", type=click.Path(dir_okay=False), default=None, help="JSON mirror of the report.")
@click.option("--jobs", default=1, show_default=True, type=int)
def sweep(plan_path, out, json_out, jobs):
    """Run every entry of a plan; exit 2 if any row violates its bounds."""
    seed = effective_seed(None)
    if plan_path == "standard":
        plan = ExperimentPlan.from_json(standard_plan(), seed)
    else:
        plan = ExperimentPlan.load(plan_path, seed)
    rows = run_plan(plan, jobs)
    _emit(rows, False, out or plan.output, json_out)
    if violations(rows):
        sys.exit(EXIT_BOUND)


if __name__ == "__main__":  # pragma: no cover
    main()
