"""Cloud intervals, CloudWrite/CloudRead and lower bounds on wheel topologies."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .engine import InitialState, RunTrace, run_schedule
from .errors import InvalidInput, ZeroCloudBandwidthEverywhere
from .router import Router, Tree, path_tree, tree_write
from .schedule import Piece, reverse_write
from .topology import Topology

Direction = Literal["cw", "ccw"]


@dataclass(frozen=True)
class IntervalStats:
    origin: int
    direction: str
    s: int
    k_cloud: int
    k_link: int
    k: int
    nodes: tuple[int, ...]   # origin first, then outward
    links: tuple[int, ...]   # links[j] joins nodes[j] and nodes[j+1]
    phi: float               # bottleneck; inf for a single node
    bc_total: int
    Z: float

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def members(self) -> frozenset[int]:
        return frozenset(self.nodes)

    def tree(self) -> Tree:
        return path_tree(list(self.nodes), list(self.links))


def _walk(topo: Topology, i: int, j: int, direction: str) -> tuple[int, int]:
    """Node reached after j steps and the link used for step j -> j+1."""
    n = topo.n
    if direction == "cw":
        v = (i + j) % n
        return v, v
    v = (i - j) % n
    return v, (v - 1) % n


def compute_cloud_interval(topo: Topology, i: int, s: int, direction: Direction = "cw") -> IntervalStats:
    if direction not in ("cw", "ccw"):
        raise InvalidInput(f"direction must be cw or ccw, not {direction!r}")
    if s < 0:
        raise InvalidInput("s must be non-negative")
    n = topo.n
    k_cloud = k_link = n
    prefix = 0
    for k in range(n):
        v, lid = _walk(topo, i, k, direction)
        prefix += topo.bc(v)
        if k_cloud == n and (k + 1) * prefix >= s:
            k_cloud = k
        if k_link == n and n > 1 and topo.links[lid].w < prefix:
            k_link = k
    k = min(k_cloud, k_link)
    size = min(k + 1, n)
    nodes, links = [], []
    for j in range(size):
        v, lid = _walk(topo, i, j, direction)
        nodes.append(v)
        if j < size - 1:
            links.append(lid)
    phi = min((topo.links[l].w for l in links), default=math.inf)
    bc_total = sum(topo.bc(v) for v in nodes)
    if bc_total == 0 and s > 0:
        raise ZeroCloudBandwidthEverywhere("no node on the ring has cloud bandwidth")
    Z = size + _ratio(s, phi) + _ratio(s, bc_total)
    return IntervalStats(i, direction, s, k_cloud, k_link, k, tuple(nodes), tuple(links), phi, bc_total, Z)


def _ratio(s: int, x: float) -> float:
    if s == 0:
        return 0.0
    return 0.0 if x == math.inf else (math.inf if x == 0 else s / x)


def _ceil_ratio(s: int, x: float) -> int:
    if s == 0 or x == math.inf:
        return 0
    return math.ceil(s / x)


def best_interval(topo: Topology, i: int, s: int) -> IntervalStats:
    """Cheaper of the two directions; ties go clockwise."""
    cw = compute_cloud_interval(topo, i, s, "cw")
    ccw = compute_cloud_interval(topo, i, s, "ccw")
    return ccw if ccw.Z < cw.Z else cw


def wheel_lower_bound(topo: Topology, i: int, s: int, direction: str = "cw") -> int:
    """max(k, ceil(s / 2 phi), ceil(s / 2 b_c(I))) for one direction; ``both`` takes the min."""
    if direction == "both":
        return min(wheel_lower_bound(topo, i, s, "cw"), wheel_lower_bound(topo, i, s, "ccw"))
    st = compute_cloud_interval(topo, i, s, direction)  # type: ignore[arg-type]
    return max(st.k, _ceil_ratio(s, 2 * st.phi), _ceil_ratio(s, 2 * st.bc_total))


@dataclass
class Measured:
    value: object
    rounds: int
    trace: RunTrace | None = None
    info: dict | None = None


def _candidates(topo: Topology, i: int, s: int, direction: str | None) -> list[IntervalStats]:
    """Intervals to try: the given direction, or both ordered by (Z, clockwise first)."""
    if direction is not None:
        return [compute_cloud_interval(topo, i, s, direction)]  # type: ignore[arg-type]
    cw = compute_cloud_interval(topo, i, s, "cw")
    ccw = compute_cloud_interval(topo, i, s, "ccw")
    return [ccw, cw] if ccw.Z < cw.Z else [cw, ccw]


def _write_plan(topo: Topology, st: IntervalStats, s: int, value: int | None, file: str):
    router = Router(topo)
    if s > 0:
        tree_write(router, st.tree(), file, [(Piece("S", 0, s), 1)], 1)
    router.run()
    init = InitialState()
    init.add_payload("S", s, value, holder=st.origin)
    return router.builder.build(), init, st


def _fastest(plans):
    """Plan with the shortest horizon; earlier candidates win ties."""
    return min(plans, key=lambda p: p[0].horizon)


def plan_cloud_write(topo: Topology, i: int, s: int, direction: str | None = None,
                     value: int | None = None, file: str = "S"):
    """Compile CloudWrite; without ``direction`` both sides are planned and the faster one kept."""
    return _fastest([_write_plan(topo, st, s, value, file) for st in _candidates(topo, i, s, direction)])


def cloud_write_interval(topo: Topology, i: int, s: int, direction: str | None = None,
                         value: int | None = None, detail: bool = False):
    """Write an s-bit file held by node ``i`` to the cloud using its cloud interval.

    Returns the number of rounds, or a :class:`Measured` record when ``detail`` is set.
    """
    sched, init, st = plan_cloud_write(topo, i, s, direction, value)
    trace = run_schedule(topo, sched, init)
    if s > 0 and not trace.file_complete("S", s):
        raise AssertionError("cloud file incomplete after CloudWrite")
    if not detail:
        return trace.rounds_elapsed
    out = trace.file_value("S", s) if s > 0 else 0
    return Measured(out, trace.rounds_elapsed, trace, {"interval": st})


def _read_plan(topo: Topology, st: IntervalStats, s: int, value: int | None, file: str):
    """CloudRead compiled as the time-reversal of the matching CloudWrite."""
    write_sched, _, _ = _write_plan(topo, st, s, None, file)
    init = InitialState()
    init.add_payload("F", s, value)
    init.cloud[file] = "F"
    return reverse_write(write_sched, file, "S", "F"), init, st


def plan_cloud_read(topo: Topology, i: int, s: int, direction: str | None = None,
                    value: int | None = None, file: str = "F"):
    """Compile CloudRead; without ``direction`` both sides are planned and the faster one kept."""
    return _fastest([_read_plan(topo, st, s, value, file) for st in _candidates(topo, i, s, direction)])


def cloud_read_interval(topo: Topology, i: int, s: int, direction: str | None = None,
                        value: int | None = None, detail: bool = False):
    """Bring an s-bit cloud file to node ``i`` through its cloud interval."""
    sched, init, st = plan_cloud_read(topo, i, s, direction, value)
    trace = run_schedule(topo, sched, init)
    if s > 0 and not trace.holds(i, "F"):
        raise AssertionError("reader does not hold the file after CloudRead")
    if not detail:
        return trace.rounds_elapsed
    return Measured(trace.payload_value("F"), trace.rounds_elapsed, trace, {"interval": st})
