"""Greedy round-by-round planner that turns routed bit streams into a Schedule.

Algorithms describe *what* has to move (pieces with routes and ready rounds);
the router serves every directed resource (local link direction, cloud uplink,
cloud downlink) up to its bandwidth each round, lowest ``(prio, ready, seq)``
first, and records the resulting actions.  The engine re-checks everything.
"""
from __future__ import annotations

import bisect
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .engine import CloudFile
from .errors import Unreachable, ZeroCloudBandwidthEverywhere
from .schedule import Piece, ScheduleBuilder
from .topology import Topology

Done = Callable[[int, "Piece | None"], None]


@dataclass
class _Entry:
    seq: int
    prio: tuple
    ready: int
    piece: Piece | None
    steps: tuple
    on_done: Done | None


def proportional_split(total: int, weights: Sequence[int]) -> list[int]:
    """Integer shares of ``total`` proportional to ``weights`` (largest remainder, index tie-break)."""
    wsum = sum(weights)
    if total == 0:
        return [0] * len(weights)
    if wsum <= 0:
        raise ZeroCloudBandwidthEverywhere("no cloud bandwidth to share the transfer")
    shares = [total * w // wsum for w in weights]
    rest = total - sum(shares)
    order = sorted((i for i, w in enumerate(weights) if w > 0),
                   key=lambda i: (-((total * weights[i]) % wsum), i))
    for i in order[:rest]:
        shares[i] += 1
    return shares


class Counter:
    """Fires ``callback(t)`` once ``total`` units have been added; t is the latest round seen."""

    def __init__(self, total: int, callback: Callable[[int], None], t_empty: int = 0) -> None:
        self.left = total
        self.callback = callback
        self.latest = t_empty
        self.fired = False
        if total <= 0:
            self.fired = True
            callback(t_empty)

    def add(self, t: int, amount: int = 1) -> None:
        self.left -= amount
        self.latest = max(self.latest, t)
        if self.left <= 0 and not self.fired:
            self.fired = True
            self.callback(self.latest)


class Router:
    def __init__(self, topo: Topology, builder: ScheduleBuilder | None = None,
                 files: dict[str, CloudFile] | None = None) -> None:
        self.topo = topo
        self.builder = builder or ScheduleBuilder()
        self.files: dict[str, CloudFile] = files if files is not None else {}
        self.queues: dict[tuple, list[_Entry]] = defaultdict(list)
        self.seq = 0
        self.last = 0
        self.now = 0

    # -- submission -------------------------------------------------------
    def push(self, piece: Piece | None, steps: Sequence[tuple], ready: int, prio=0,
             on_done: Done | None = None) -> None:
        steps = tuple(steps)
        if piece is not None and piece.bits == 0:
            return
        if not steps:
            if on_done is not None:
                on_done(ready - 1, piece)
            return
        self.seq += 1
        e = _Entry(self.seq, prio if isinstance(prio, tuple) else (prio,), ready, piece, steps, on_done)
        self.queues[self._resource(steps[0])].append(e)

    def ctl(self, u: int, v: int, link: int, ready: int, on_done: Done | None, prio=0) -> None:
        self.push(None, [("S", u, v, link)], ready, prio, on_done)

    def read(self, node: int, file: str, lo: int, hi: int, then: Sequence[tuple], ready: int,
             prio=0, on_done: Done | None = None) -> None:
        self.push(Piece(file, lo, hi), [("R", node, file)] + list(then), ready, prio, on_done)

    def compute(self, t: int, node: int, out: str, inputs: Iterable[str], size: int, fn, label: str = "") -> None:
        self.builder.compute(t, node, out, inputs, size, fn, label)
        self.last = max(self.last, t)

    # -- execution --------------------------------------------------------
    @staticmethod
    def _resource(step: tuple) -> tuple:
        kind = step[0]
        if kind == "S":
            return ("L", step[3], step[1])
        if kind == "W":
            return ("U", step[1])
        return ("D", step[1])

    def _capacity(self, res: tuple) -> int:
        if res[0] == "L":
            return self.topo.capacity(res[1], res[2])
        return self.topo.bc(res[1])

    def pending(self) -> bool:
        return any(self.queues.values())

    def run(self) -> int:
        """Serve queues until empty; returns the last round with any action."""
        t = self.now + 1
        while self.pending():
            moved: list[tuple[_Entry, Piece | None]] = []
            served_any = False
            next_ready = math.inf
            for res in sorted(self.queues):
                q = self.queues[res]
                if not q:
                    del self.queues[res]
                    continue
                elig = [e for e in q if e.ready <= t]
                for e in q:
                    if e.ready > t:
                        next_ready = min(next_ready, e.ready)
                cap = self._capacity(res)
                if not elig or cap <= 0:
                    continue
                elig.sort(key=lambda e: (e.prio, e.ready, e.seq))
                finished = set()
                for e in elig:
                    if cap <= 0:
                        break
                    if e.piece is None:
                        take = 1
                        part = None
                        finished.add(e.seq)
                    else:
                        take = min(cap, e.piece.bits)
                        part = Piece(e.piece.payload, e.piece.lo, e.piece.lo + take)
                        if take == e.piece.bits:
                            finished.add(e.seq)
                        else:
                            e.piece = Piece(e.piece.payload, e.piece.lo + take, e.piece.hi)
                    cap -= take
                    served_any = True
                    moved.extend(self._serve(t, e, part))
                if finished:
                    self.queues[res] = [e for e in q if e.seq not in finished]
            if served_any:
                self.last = max(self.last, t)
            for e, part in moved:
                rest = e.steps[1:]
                if rest:
                    self.push(part, rest, t + 1, e.prio, e.on_done)
                elif e.on_done is not None:
                    e.on_done(t, part)
            if not served_any:
                if next_ready is math.inf:
                    if self.pending():
                        stuck = [k for k, q in self.queues.items() if q]
                        raise Unreachable(f"transfer cannot progress on {stuck[:3]}")
                    break
                t = max(t + 1, int(next_ready))
            else:
                t += 1
        self.now = max(self.now, self.last)
        return self.last

    def _serve(self, t: int, e: _Entry, part: Piece | None) -> list[tuple[_Entry, Piece | None]]:
        step = e.steps[0]
        kind = step[0]
        if kind == "S":
            _, u, v, link = step
            self.builder.send(t, u, v, link, part, ctl=1 if part is None else 0)
            return [(e, part)]
        if kind == "W":
            _, u, fname, delta = step
            off = part.lo + delta
            self.builder.write(t, u, fname, off, part)
            self.files.setdefault(fname, CloudFile()).put(off, part)
            return [(e, part)]
        _, u, fname = step
        self.builder.read(t, u, fname, part.lo, part.hi)
        got = self.files[fname].get(part.lo, part.hi)
        return [(e, p) for p in got]


# -- trees over node sets ----------------------------------------------------

@dataclass
class Tree:
    root: int
    order: list[int]          # root first, then by (depth, id)
    parent: dict[int, int]
    link: dict[int, int]      # child -> link id towards parent
    depth: dict[int, int]

    def children(self) -> dict[int, list[int]]:
        ch: dict[int, list[int]] = {v: [] for v in self.order}
        for v in self.order[1:]:
            ch[self.parent[v]].append(v)
        return ch

    def path_from_root(self, v: int) -> list[tuple]:
        steps = []
        while v != self.root:
            p = self.parent[v]
            steps.append(("S", p, v, self.link[v]))
            v = p
        return steps[::-1]

    def path_to_root(self, v: int) -> list[tuple]:
        steps = []
        while v != self.root:
            p = self.parent[v]
            steps.append(("S", v, p, self.link[v]))
            v = p
        return steps

    @property
    def height(self) -> int:
        return max(self.depth.values())


def path_tree(nodes: Sequence[int], links: Sequence[int]) -> Tree:
    """Tree that is a path ``nodes[0] - nodes[1] - ...``; ``links[j]`` joins nodes[j] and nodes[j+1]."""
    parent = {nodes[j + 1]: nodes[j] for j in range(len(nodes) - 1)}
    link = {nodes[j + 1]: links[j] for j in range(len(nodes) - 1)}
    depth = {v: j for j, v in enumerate(nodes)}
    return Tree(nodes[0], list(nodes), parent, link, depth)


def bfs_tree(topo: Topology, root: int, members: Iterable[int] | None = None) -> Tree:
    """BFS tree inside ``members``; order by (distance, id), parent = smallest-id closer neighbour."""
    dist = topo.hop_distances(root, members)
    order = sorted(dist, key=lambda v: (dist[v], v))
    parent, link = {}, {}
    for v in order[1:]:
        best = None
        for nb, idx in topo.out_links(v):
            if topo.links[idx].w > 0 and dist.get(nb) == dist[v] - 1:
                cand = (nb, -topo.links[idx].w, idx)
                if best is None or cand < best:
                    best = cand
        parent[v] = best[0]
        link[v] = best[2]
    return Tree(root, order, parent, link, dict(dist))


# -- collective transfers on a tree -----------------------------------------

class TreeWriter:
    """Leader ``tree.root`` writes a ``total``-bit file; bits are fed as they become available.

    Every tree node writes a slice proportional to its cloud bandwidth, slices of
    deeper nodes first in the file; nodes acknowledge towards the root once their
    slice and all child acknowledgements are done.
    """

    def __init__(self, router: Router, tree: Tree, file: str, total: int, t0: int, prio=0,
                 on_complete: Callable[[int], None] | None = None) -> None:
        self.router, self.tree, self.file, self.prio = router, tree, file, prio
        topo = router.topo
        idx = {v: k for k, v in enumerate(tree.order)}
        layout = sorted(tree.order, key=lambda v: (-tree.depth[v], idx[v]))
        sizes = proportional_split(total, [topo.bc(v) for v in layout])
        self.slices, off = [], 0
        for v, q in zip(layout, sizes):
            self.slices.append((v, off, off + q))
            off += q
        self._starts = [lo for _, lo, _ in self.slices]
        children = tree.children()
        waiting = {v: 1 + len(children[v]) for v in tree.order}
        latest = {v: t0 - 1 for v in tree.order}

        def settle(v: int, t: int) -> None:
            latest[v] = max(latest[v], t)
            waiting[v] -= 1
            if waiting[v] > 0:
                return
            if v == tree.root:
                if on_complete is not None:
                    on_complete(latest[v])
                return
            p = tree.parent[v]
            router.ctl(v, p, tree.link[v], latest[v] + 1, lambda tt, _p=None, p=p: settle(p, tt), prio)

        self.counters = {v: Counter(hi - lo, lambda t, v=v: settle(v, t), t0 - 1) for v, lo, hi in self.slices}

    def feed(self, piece: Piece, offset: int, ready: int) -> None:
        """Bits of ``piece`` go to file positions ``offset ..``; usable by the root from ``ready``."""
        a, b = offset, offset + piece.bits
        k = max(0, bisect.bisect_right(self._starts, a) - 1)
        while k < len(self.slices) and self.slices[k][1] < b:
            v, lo, hi = self.slices[k]
            x, y = max(a, lo), min(b, hi)
            if x < y:
                sub = Piece(piece.payload, piece.lo + (x - a), piece.lo + (y - a))
                steps = self.tree.path_from_root(v) + [("W", v, self.file, x - sub.lo)]
                self.router.push(sub, steps, ready, self.prio,
                                 lambda t, pc, c=self.counters[v]: c.add(t, pc.bits))
            k += 1


def tree_write(router: Router, tree: Tree, file: str, stream: Sequence[tuple[Piece, int]], t0: int,
               prio=0, on_complete: Callable[[int], None] | None = None) -> TreeWriter:
    """Write ``stream`` (pieces in file order with ready rounds) through ``tree``."""
    total = sum(p.bits for p, _ in stream)
    w = TreeWriter(router, tree, file, total, t0, prio, on_complete)
    off = 0
    for piece, ready in stream:
        w.feed(piece, off, ready)
        off += piece.bits
    return w


def tree_read(router: Router, tree: Tree, segments: Sequence[tuple[str, int, int]], t0: int, prio=0,
              on_piece: Done | None = None, on_complete: Callable[[int], None] | None = None,
              ) -> list[tuple[int, int, int]]:
    """Leader ``tree.root`` collects the concatenation of file ranges ``segments``.

    A one-bit start message travels down the tree; each node then reads its
    proportional slice (shallower nodes hold earlier parts of the stream) and
    forwards it towards the root.
    """
    topo = router.topo
    idx = {v: k for k, v in enumerate(tree.order)}
    layout = sorted(tree.order, key=lambda v: (tree.depth[v], idx[v]))
    total = sum(hi - lo for _, lo, hi in segments)
    sizes = proportional_split(total, [topo.bc(v) for v in layout])
    slices, off = [], 0
    for v, q in zip(layout, sizes):
        slices.append((v, off, off + q))
        off += q
    my_slice = {v: (lo, hi) for v, lo, hi in slices}
    children = tree.children()
    done = Counter(total, lambda t: on_complete(t) if on_complete else None, t0 - 1)

    def arrived(t: int, piece: Piece | None) -> None:
        if on_piece is not None:
            on_piece(t, piece)
        done.add(t, piece.bits)

    def begin(v: int, ready: int) -> None:
        for c in children[v]:
            router.ctl(v, c, tree.link[c], ready, lambda t, _p=None, c=c: begin(c, t + 1), prio)
        lo, hi = my_slice[v]
        back = tree.path_to_root(v)
        pos = 0
        for fname, flo, fhi in segments:
            a, b = pos, pos + (fhi - flo)
            pos = b
            x, y = max(a, lo), min(b, hi)
            if x < y:
                router.read(v, fname, flo + (x - a), flo + (y - a), back, ready, prio, arrived)

    begin(tree.root, t0)
    return slices
