"""Uniform entry point: run a registered algorithm, report rounds and its analytic bounds."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable

from .engine import run_schedule
from .errors import InvalidInput
from .fatlinks import (all_cloud_clusters, cloud_read_cluster, cloud_write_cluster, cloudcast_fat,
                       cluster_lower_bound, combined_write_fat, compute_cloud_cluster, default_kappa)
from .fedsum import federated_sum, lane_bits, random_inputs
from .flow import _pair_links, quickest_multi_schedule, quickest_read_schedule, quickest_write_schedule, \
    reach_lower_bound
from .generic import combined_write_generic
from .operators import make_op
from .topology import Topology
from .wheel import best_interval, cloud_read_interval, cloud_write_interval, wheel_lower_bound
from .wheel_combining import (clog2, cloudcast_wheel, combined_write_modular, combined_write_wheel,
                              max_node_lower_bound, wheel_zmax)

# constants of the asserted upper bounds
C_WHEEL_OP = 8
C_WHEEL_COMBINE = 16
C_CLOUDCAST = 8
C_FAT = 32


@dataclass
class RunResult:
    output: object
    rounds: int
    analytic_bound: float | None = None
    lower_bound: float | None = None
    passed: bool = True
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.output
        yield self.rounds


def log_factor(n: int) -> int:
    """ceil(log2 n), at least 1 so single-node bounds stay positive."""
    return max(1, clog2(n))


def _within(rounds: float, lower: float | None, upper: float | None) -> bool:
    return (lower is None or rounds >= lower) and (upper is None or rounds <= upper)


def _value(params: dict, inputs, seed: int, size: int) -> int:
    if inputs is not None:
        return int(inputs)
    return random.Random(seed).getrandbits(size) if size else 0


def _operands(topo: Topology, params: dict, inputs, seed: int):
    op = make_op(params.get("op", "xor"), params.get("s"), params.get("grain"))
    if inputs is None:
        rng = random.Random(seed)
        inputs = [op.random_value(rng) for _ in range(topo.n)]
    return op, list(inputs)


def _size(params: dict) -> int:
    if "s" not in params:
        raise InvalidInput("parameter s (size in bits) is required")
    s = int(params["s"])
    if s < 0:
        raise InvalidInput("s must be non-negative")
    return s


def _node(topo: Topology, params: dict) -> int:
    i = int(params.get("node", 0))
    if not 0 <= i < topo.n:
        raise InvalidInput(f"node {i} out of range")
    return i


# -- wheel -------------------------------------------------------------------

def _wheel_write(topo, params, inputs, seed):
    s, i = _size(params), _node(topo, params)
    value = _value(params, inputs, seed, s)
    m = cloud_write_interval(topo, i, s, value=value, detail=True)
    upper = C_WHEEL_OP * best_interval(topo, i, s).Z
    lower = wheel_lower_bound(topo, i, s, "both")
    return RunResult(m.value, m.rounds, upper, lower, m.value == value and _within(m.rounds, lower, upper))


def _wheel_read(topo, params, inputs, seed):
    s, i = _size(params), _node(topo, params)
    value = _value(params, inputs, seed, s)
    m = cloud_read_interval(topo, i, s, value=value, detail=True)
    upper = C_WHEEL_OP * best_interval(topo, i, s).Z
    lower = wheel_lower_bound(topo, i, s, "both")
    return RunResult(m.value, m.rounds, upper, lower, m.value == value and _within(m.rounds, lower, upper))


def _combine_wheel(topo, params, inputs, seed):
    op, xs = _operands(topo, params, inputs, seed)
    out = combined_write_wheel(topo, op, xs)
    z = wheel_zmax(topo, op.size)
    upper = C_WHEEL_COMBINE * z.value * log_factor(topo.n)
    lower = max_node_lower_bound(topo, op.size)
    ok = out.value == op.fold(xs) and _within(out.rounds, lower, upper)
    return RunResult(out.value, out.rounds, upper, lower, ok, {"g": op.grain_size})


def modular_bound(topo: Topology, s: int, g: int) -> float:
    z = wheel_zmax(topo, s)
    phi_term = 0 if z.phi_min == math.inf else math.ceil(g / z.phi_min)
    return C_WHEEL_COMBINE * (z.value + z.size_max * phi_term + math.ceil(g / z.bc_min) * log_factor(topo.n))


def _combine_modular(topo, params, inputs, seed):
    op, xs = _operands(topo, params, inputs, seed)
    out = combined_write_modular(topo, op, xs, strict=bool(params.get("strict", False)))
    upper = modular_bound(topo, op.size, op.grain_size)
    lower = max_node_lower_bound(topo, op.size)
    ok = out.value == op.fold(xs) and _within(out.rounds, lower, upper)
    return RunResult(out.value, out.rounds, upper, lower, ok, {"g": op.grain_size})


def _cloudcast_wheel(topo, params, inputs, seed):
    s = _size(params)
    value = _value(params, inputs, seed, s)
    out = cloudcast_wheel(topo, s, value)
    upper = C_CLOUDCAST * wheel_zmax(topo, s).value
    lower = max(wheel_lower_bound(topo, i, s, "both") for i in range(topo.n))
    return RunResult(value, out.rounds, upper, lower, _within(out.rounds, lower, upper))


# -- fat links ---------------------------------------------------------------

def _cluster_write(topo, params, inputs, seed):
    s, i = _size(params), _node(topo, params)
    value = _value(params, inputs, seed, s)
    m = cloud_write_cluster(topo, i, s, value=value, detail=True)
    upper = C_WHEEL_OP * compute_cloud_cluster(topo, i, s).Z
    lower = cluster_lower_bound(topo, i, s)
    return RunResult(m.value, m.rounds, upper, lower, m.value == value and _within(m.rounds, lower, upper))


def _cluster_read(topo, params, inputs, seed):
    s, i = _size(params), _node(topo, params)
    value = _value(params, inputs, seed, s)
    m = cloud_read_cluster(topo, i, s, value=value, detail=True)
    upper = C_WHEEL_OP * compute_cloud_cluster(topo, i, s).Z
    lower = cluster_lower_bound(topo, i, s)
    return RunResult(m.value, m.rounds, upper, lower, m.value == value and _within(m.rounds, lower, upper))


def fat_bound(topo: Topology, s: int) -> tuple[float, float]:
    zmax = max(c.Z for c in all_cloud_clusters(topo, s))
    return C_FAT * zmax * log_factor(topo.n) ** 2, zmax


def _kappa(topo: Topology, params: dict) -> int | None:
    """Cover parameter actually used; None when every cluster is kept."""
    if params.get("cover", "sparse") != "sparse":
        return None
    return params.get("kappa") or default_kappa(topo.n)


def _combine_fat(topo, params, inputs, seed):
    op, xs = _operands(topo, params, inputs, seed)
    out = combined_write_fat(topo, op, xs, params.get("cover", "sparse"), params.get("kappa"),
                             params.get("variant", "tree"))
    upper, zmax = fat_bound(topo, op.size)
    lower = zmax / 2
    ok = out.value == op.fold(xs) and _within(out.rounds, lower, upper)
    return RunResult(out.value, out.rounds, upper, lower, ok,
                     {"load": out.info["cover"].max_load, "kappa": _kappa(topo, params)})


def _cloudcast_fat(topo, params, inputs, seed):
    s = _size(params)
    value = _value(params, inputs, seed, s)
    out = cloudcast_fat(topo, s, value, params.get("cover", "sparse"), params.get("kappa"))
    upper, _ = fat_bound(topo, s)
    lower = max(cluster_lower_bound(topo, i, s) for i in range(topo.n))
    return RunResult(value, out.rounds, upper, lower, _within(out.rounds, lower, upper),
                     {"kappa": _kappa(topo, params)})


def _cloudcast(topo, params, inputs, seed):
    if topo.mode == "wheel":
        return _cloudcast_wheel(topo, params, inputs, seed)
    return _cloudcast_fat(topo, params, inputs, seed)


# -- general graphs ----------------------------------------------------------

def _combine_generic(topo, params, inputs, seed):
    op, xs = _operands(topo, params, inputs, seed)
    out = combined_write_generic(topo, op, xs)
    t_s = out.info["T_s"]
    upper = 3 * t_s * clog2(topo.n) + t_s
    ok = out.value == op.fold(xs) and _within(out.rounds, None, upper)
    return RunResult(out.value, out.rounds, upper, None, ok, {"T_s": t_s})


def _quickest(mode: str):
    def run(topo, params, inputs, seed):
        s = _size(params)
        if mode in ("write", "read"):
            i = _node(topo, params)
            plan = (quickest_write_schedule if mode == "write" else quickest_read_schedule)(topo, i, s)
            demand = {i: s}
        else:
            sizes = {v: s for v in range(topo.n)}
            plan = quickest_multi_schedule(topo, sizes, "write" if mode == "caw" else "read")
            demand = sizes
        trace = run_schedule(topo, plan.schedule, plan.init)
        pairs = _pair_links(topo, transpose=mode in ("read", "car"))
        lower = reach_lower_bound(topo, pairs, demand)
        ok = trace.rounds_elapsed == plan.horizon and plan.horizon >= lower
        return RunResult(plan.schedule, plan.horizon, None, lower, ok)
    return run


# -- applications --------------------------------------------------------------

def _fedsum(topo, params, inputs, seed):
    modulus = int(params.get("modulus", 2 ** 16))
    m = int(params.get("m", 8))
    xs = inputs if inputs is not None else random_inputs(topo.n, m, modulus, seed)
    res = federated_sum(xs, modulus, seed, topo)
    want = [sum(col) % modulus for col in zip(*xs)]
    lane = lane_bits(modulus)
    upper = modular_bound(topo, m * lane, lane) + res.exchange_rounds
    ok = res.aggregate == want and not res.info["leaked"] and _within(res.rounds, None, upper)
    return RunResult(res.aggregate, res.rounds, upper, None, ok, {"g": lane})


REGISTRY: dict[str, Callable] = {
    "cloud_write_interval": _wheel_write,
    "cloud_read_interval": _wheel_read,
    "combined_write_wheel": _combine_wheel,
    "combined_write_modular": _combine_modular,
    "cloudcast_wheel": _cloudcast_wheel,
    "cloud_write_cluster": _cluster_write,
    "cloud_read_cluster": _cluster_read,
    "combined_write_fat": _combine_fat,
    "cloudcast_fat": _cloudcast_fat,
    "cloudcast": _cloudcast,
    "combined_write_generic": _combine_generic,
    "quickest_write": _quickest("write"),
    "quickest_read": _quickest("read"),
    "quickest_caw": _quickest("caw"),
    "quickest_car": _quickest("car"),
    "fedsum": _fedsum,
}


def measure(topo: Topology, algo: str, params: dict | None = None, inputs=None, seed: int = 0) -> RunResult:
    """Run ``algo`` on ``topo``; inputs default to seeded random values."""
    if algo not in REGISTRY:
        raise InvalidInput(f"unknown algorithm {algo!r}")
    return REGISTRY[algo](topo, dict(params or {}), inputs, seed)
