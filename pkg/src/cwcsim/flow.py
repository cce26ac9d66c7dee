"""Minimum-horizon cloud write/read schedules via max flow on time-expanded graphs.

Layer ``t`` of the expanded graph is the state at the end of round ``t``.  An
arc leaving layer ``t`` is a transfer in round ``t + 1``: link arcs go to the
neighbour's copy in layer ``t + 1``, storage arcs keep bits in place and cloud
arcs drain into a single sink.  A horizon ``T`` is feasible iff the max flow
from the super source equals the total demand; the smallest such ``T`` is found
by doubling followed by binary search.  Reads are time reversals of writes on
the transposed topology.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .engine import CloudFile, InitialState
from .errors import InvalidInput, Unreachable
from .schedule import Piece, Schedule, ScheduleBuilder
from .topology import Topology

# one directed hop: (link id, capacity from the sending end)
PairLinks = dict[tuple[int, int], list[tuple[int, int]]]


def _pair_links(topo: Topology, transpose: bool = False) -> PairLinks:
    out: PairLinks = defaultdict(list)
    for idx, ln in enumerate(topo.links):
        for a, b in ((ln.u, ln.v), (ln.v, ln.u)):
            cap = topo.capacity(idx, a)
            if cap <= 0:
                continue
            key = (b, a) if transpose else (a, b)
            out[key].append((idx, cap))
    return dict(sorted(out.items()))


def _reachable_cloud(topo: Topology, pairs: PairLinks, src: int) -> bool:
    seen, stack = {src}, [src]
    adj: dict[int, list[int]] = defaultdict(list)
    for (a, b) in pairs:
        adj[a].append(b)
    while stack:
        u = stack.pop()
        if topo.bc(u) > 0:
            return True
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


@dataclass
class _Expansion:
    n: int
    horizon: int
    matrix: csr_matrix
    source: int
    sink: int

    def node(self, v: int, t: int) -> int:
        return t * self.n + v

    def locate(self, k: int) -> tuple[int, int]:
        return k % self.n, k // self.n


def _expand(topo: Topology, pairs: PairLinks, demand: dict[int, int], release: dict[int, int],
            horizon: int) -> _Expansion:
    n, T = topo.n, horizon
    total = sum(demand.values())
    src, sink = n * (T + 1), n * (T + 1) + 1
    # one layer's arcs (tail node, head node, capacity); head -1 marks the sink
    tails, heads, caps = [], [], []
    for (a, b), lst in pairs.items():
        tails.append(a)
        heads.append(b)
        caps.append(min(sum(c for _, c in lst), total))
    for v in range(n):
        tails.append(v)
        heads.append(v)
        caps.append(total)
        if topo.bc(v) > 0:
            tails.append(v)
            heads.append(-1)
            caps.append(min(topo.bc(v), total))
    tail, head = np.array(tails), np.array(heads)
    offset = (np.arange(T) * n)[:, None]
    row_block = offset + tail
    col_block = np.where(head < 0, sink, offset + n + head)
    live = [(v, d) for v, d in demand.items() if d > 0]
    rows = [row_block.ravel(), np.full(len(live), src)]
    cols = [col_block.ravel(), np.array([release.get(v, 0) * n + v for v, _ in live], dtype=int)]
    caps = [np.broadcast_to(np.array(caps), row_block.shape).ravel(), np.array([d for _, d in live], dtype=int)]
    size = sink + 1
    mat = csr_matrix((np.concatenate(caps).astype(np.int32),
                      (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))
    mat.sum_duplicates()
    return _Expansion(n, T, mat, src, sink)


def _max_flow(exp: _Expansion):
    return maximum_flow(exp.matrix, exp.source, exp.sink, method="dinic")


def reach_lower_bound(topo: Topology, pairs: PairLinks, demand: dict[int, int],
                      release: dict[int, int] | None = None) -> int:
    """Smallest T for which the cloud capacity reachable in time could absorb every demand.

    A node at hop distance d from a source can write that source's bits in at
    most T - d rounds, so each source alone needs sum_v b_c(v) * (T - d(v)) >= s;
    all sources together are limited by the total cloud capacity.
    """
    release = release or {}
    adj: dict[int, list[int]] = defaultdict(list)
    for a, b in pairs:
        adj[a].append(b)
    best = 0
    live = {v: d for v, d in demand.items() if d > 0}
    for v, d in live.items():
        dist = {v: 0}
        frontier = [v]
        while frontier:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            frontier = nxt
        T = release.get(v, 0)
        while sum(topo.bc(u) * max(0, T - release.get(v, 0) - du) for u, du in dist.items()) < d:
            T += 1
        best = max(best, T)
    cap = sum(topo.bc(u) for u in range(topo.n))
    if live and cap > 0:
        best = max(best, -(-sum(live.values()) // cap))
    return best


def _quickest(topo: Topology, pairs: PairLinks, demand: dict[int, int],
              release: dict[int, int], upper: int | None = None) -> tuple[int, _Expansion, object]:
    total = sum(demand.values())
    for v, d in demand.items():
        if d < 0:
            raise InvalidInput("demands must be non-negative")
        if d > 0 and not _reachable_cloud(topo, pairs, v):
            raise Unreachable(f"node {v} cannot reach any cloud link")
    if total == 0:
        return 0, _expand(topo, pairs, {}, {}, 0), None

    def feasible(T: int):
        exp = _expand(topo, pairs, demand, release, T)
        res = _max_flow(exp)
        return res.flow_value >= total, exp, res

    lo = max(max(release.get(v, 0) for v, d in demand.items() if d > 0),
             reach_lower_bound(topo, pairs, demand, release) - 1)
    hi = lo + 1 if upper is None else max(lo + 1, upper)
    ok, exp, res = feasible(hi)
    while not ok:
        lo, hi = hi, 2 * hi
        ok, exp, res = feasible(hi)
    best = (hi, exp, res)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, exp, res = feasible(mid)
        if ok:
            hi, best = mid, (mid, exp, res)
        else:
            lo = mid
    return best


def _paths(exp: _Expansion, flow: csr_matrix) -> dict[int, list[tuple[int, list[tuple[int, int]]]]]:
    """Decompose an acyclic flow into (amount, [(node, layer), ...]) paths grouped by origin node."""
    flow = flow.tocsr()
    indptr, indices, data = flow.indptr, flow.indices, flow.data
    heads: dict[int, list[int]] = {}
    amounts: dict[int, list[int]] = {}
    for u in range(flow.shape[0]):
        a, b = indptr[u], indptr[u + 1]
        if a == b:
            continue
        pos = data[a:b] > 0
        if pos.any():
            heads[u] = indices[a:b][pos].tolist()
            amounts[u] = data[a:b][pos].tolist()
    ptr = dict.fromkeys(heads, 0)
    n = exp.n
    result: dict[int, list[tuple[int, list[tuple[int, int]]]]] = defaultdict(list)
    src, sink = exp.source, exp.sink
    while ptr.get(src, 0) < len(heads.get(src, ())):
        walk = []
        u = src
        amount = None
        while u != sink:
            k = ptr[u]
            while amounts[u][k] == 0:
                k += 1
            ptr[u] = k
            walk.append((u, k))
            amt = amounts[u][k]
            amount = amt if amount is None else min(amount, amt)
            u = heads[u][k]
        hops = []
        for u, k in walk:
            amounts[u][k] -= amount
            if amounts[u][k] == 0:
                ptr[u] = k + 1
            if u != src:
                hops.append((u % n, u // n))
        result[hops[0][0]].append((amount, hops))
    return result


class _LinkBudget:
    """Splits a hop between parallel links without exceeding any of them in a round."""

    def __init__(self) -> None:
        self.used: dict[tuple[int, int, int], int] = defaultdict(int)

    def split(self, rnd: int, sender: int, options: list[tuple[int, int]], amount: int) -> list[tuple[int, int]]:
        out = []
        for link, cap in options:
            free = cap - self.used[(rnd, link, sender)]
            take = min(free, amount)
            if take > 0:
                self.used[(rnd, link, sender)] += take
                out.append((link, take))
                amount -= take
            if amount == 0:
                break
        assert amount == 0, "flow exceeds link capacity"
        return out


def _chunks(stream: Sequence[tuple], amount: int, cursor: list[int]) -> Iterator[tuple[tuple, int, int]]:
    """Next ``amount`` positions of a segmented stream as (segment, start, stop) within segments."""
    while amount > 0:
        k, pos = cursor
        seg = stream[k]
        length = _seg_len(seg)
        take = min(amount, length - pos)
        yield seg, pos, pos + take
        amount -= take
        pos += take
        if pos == length:
            cursor[0], cursor[1] = k + 1, 0
        else:
            cursor[1] = pos


def _seg_len(seg: tuple) -> int:
    if isinstance(seg[0], Piece):
        return seg[0].bits
    return seg[2] - seg[1]


# -- composable primitives --------------------------------------------------------

WriteStream = list[tuple[Piece, str, int]]      # (piece, file, file offset of piece.lo)
ReadStream = list[tuple[str, int, int]]         # (file, lo, hi)


def flow_write(topo: Topology, builder: ScheduleBuilder, streams: dict[int, WriteStream], t_base: int = 0,
               release: dict[int, int] | None = None, files: dict[str, CloudFile] | None = None) -> int:
    """Schedule the fastest joint write of every node's stream; rounds are ``t_base + 1 ..``.

    ``release[v]`` delays node ``v``'s data to the end of relative round ``release[v]``.
    Returns the relative horizon.
    """
    pairs = _pair_links(topo)
    demand = {v: sum(p.bits for p, _, _ in st) for v, st in streams.items()}
    release = release or {}
    T, exp, res = _quickest(topo, pairs, demand, release)
    if T == 0:
        return 0
    budget = _LinkBudget()
    for v, paths in sorted(_paths(exp, res.flow).items()):
        cursor = [0, 0]
        for amount, hops in paths:
            for (piece, fname, off), a, b in _chunks(streams[v], amount, cursor):
                sub = Piece(piece.payload, piece.lo + a, piece.lo + b)
                _emit_write_path(builder, budget, pairs, hops, sub, fname, off + a, t_base, files)
    return T


def _split(pieces: Sequence[Piece], sizes: Sequence[int]) -> list[list[Piece]]:
    """Cut a piece sequence into consecutive groups of the given bit counts."""
    out, k, pos = [], 0, 0
    for size in sizes:
        group = []
        while size > 0:
            p = pieces[k]
            take = min(size, p.bits - pos)
            group.append(Piece(p.payload, p.lo + pos, p.lo + pos + take))
            size -= take
            pos += take
            if pos == p.bits:
                k, pos = k + 1, 0
        out.append(group)
    return out


def _emit_write_path(builder, budget, pairs, hops, piece, fname, offset, t_base, files) -> None:
    for (u, t), (v, _) in zip(hops, hops[1:]):
        if u == v:
            continue
        parts = budget.split(t + 1, u, pairs[(u, v)], piece.bits)
        for (link, _), group in zip(parts, _split([piece], [b for _, b in parts])):
            for sub in group:
                builder.send(t_base + t + 1, u, v, link, sub)
    node, layer = hops[-1]
    builder.write(t_base + layer + 1, node, fname, offset, piece)
    if files is not None:
        files.setdefault(fname, CloudFile()).put(offset, piece)


def flow_read(topo: Topology, builder: ScheduleBuilder, streams: dict[int, ReadStream],
              files: dict[str, CloudFile], t_base: int = 0) -> int:
    """Schedule the fastest joint read of every node's file ranges; returns the relative horizon."""
    pairs_t = _pair_links(topo, transpose=True)
    pairs = _pair_links(topo)
    demand = {v: sum(hi - lo for _, lo, hi in st) for v, st in streams.items()}
    T, exp, res = _quickest(topo, pairs_t, demand, {})
    if T == 0:
        return 0
    budget = _LinkBudget()
    for v, paths in sorted(_paths(exp, res.flow).items()):
        cursor = [0, 0]
        for amount, hops in paths:
            for (fname, lo, _), a, b in _chunks(streams[v], amount, cursor):
                _emit_read_path(builder, budget, pairs, hops, fname, lo + a, lo + b, files, T, t_base)
    return T


def _emit_read_path(builder, budget, pairs, hops, fname, lo, hi, files, T, t_base) -> None:
    # time reversal of a write on the transposed graph: its last hop is our read
    node, layer = hops[-1]
    builder.read(t_base + T - layer, node, fname, lo, hi)
    pieces = files[fname].get(lo, hi)
    for (x, t), (y, _) in zip(hops, hops[1:]):
        if x == y:
            continue
        # transposed arc x -> y leaving layer t becomes y -> x in round T - t
        rnd = T - t
        parts = budget.split(rnd, y, pairs[(y, x)], hi - lo)
        for (link, _), group in zip(parts, _split(pieces, [b for _, b in parts])):
            for sub in group:
                builder.send(t_base + rnd, y, x, link, sub)


def quickest_write_horizon(topo: Topology, i: int, s: int, upper: int | None = None) -> int:
    """T* of CloudWrite from node ``i`` without building the schedule.

    ``upper`` is only a search hint: it is probed first and the search widens if it is infeasible.
    """
    if s <= 0:
        return 0
    return _quickest(topo, _pair_links(topo), {i: s}, {}, upper)[0]


# -- public schedules --------------------------------------------------------------

@dataclass
class FlowPlan:
    schedule: Schedule
    horizon: int
    init: InitialState = field(default_factory=InitialState)

    def __iter__(self):
        yield self.schedule
        yield self.horizon


def quickest_write_schedule(topo: Topology, i: int, s: int, value: int | None = None,
                            file: str = "S") -> FlowPlan:
    """Optimal CloudWrite of the s-bit payload ``S`` held by node ``i``."""
    if not 0 <= i < topo.n:
        raise InvalidInput(f"node {i} out of range")
    builder = ScheduleBuilder()
    init = InitialState()
    init.add_payload("S", s, value, holder=i)
    T = flow_write(topo, builder, {i: [(Piece("S", 0, s), file, 0)]} if s > 0 else {})
    return FlowPlan(builder.build(), T, init)


def quickest_read_schedule(topo: Topology, i: int, s: int, value: int | None = None,
                           file: str = "F") -> FlowPlan:
    """Optimal CloudRead of an s-bit cloud file into node ``i``."""
    if not 0 <= i < topo.n:
        raise InvalidInput(f"node {i} out of range")
    builder = ScheduleBuilder()
    init = InitialState()
    init.add_payload("F", s, value)
    init.cloud[file] = "F"
    files = {file: CloudFile()}
    if s > 0:
        files[file].put(0, Piece("F", 0, s))
    T = flow_read(topo, builder, {i: [(file, 0, s)]} if s > 0 else {}, files)
    return FlowPlan(builder.build(), T, init)


def quickest_multi_schedule(topo: Topology, sizes: dict[int, int] | Sequence[int], mode: str = "write") -> FlowPlan:
    """Optimal joint write (every node ``v`` writes ``S{v}`` to file ``f{v}``) or joint read
    (every node ``v`` reads file ``f{v}``)."""
    if not isinstance(sizes, dict):
        sizes = dict(enumerate(sizes))
    if sum(sizes.values()) < 1:
        raise InvalidInput("total size must be positive")
    if mode not in ("write", "read"):
        raise InvalidInput(f"mode must be write or read, not {mode!r}")
    builder = ScheduleBuilder()
    init = InitialState()
    live = {v: s for v, s in sorted(sizes.items()) if s > 0}
    if mode == "write":
        for v, s in live.items():
            init.add_payload(f"S{v}", s, None, holder=v)
        T = flow_write(topo, builder, {v: [(Piece(f"S{v}", 0, s), f"f{v}", 0)] for v, s in live.items()})
    else:
        files = {}
        for v, s in live.items():
            init.add_payload(f"S{v}", s, None)
            init.cloud[f"f{v}"] = f"S{v}"
            files[f"f{v}"] = CloudFile()
            files[f"f{v}"].put(0, Piece(f"S{v}", 0, s))
        T = flow_read(topo, builder, {v: [(f"f{v}", 0, s)] for v, s in live.items()}, files)
    return FlowPlan(builder.build(), T, init)
