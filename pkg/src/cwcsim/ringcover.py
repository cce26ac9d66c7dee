"""Minimum-cardinality covers of a ring by arcs, and their 3-colouring."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ColoringImpossible, InvalidInput


@dataclass(frozen=True)
class Arc:
    """Clockwise arc of ``length`` nodes starting at ``start`` on a ring of ``n``."""

    index: int
    start: int
    length: int
    n: int

    @property
    def nodes(self) -> list[int]:
        return [(self.start + j) % self.n for j in range(min(self.length, self.n))]

    @property
    def last(self) -> int:
        return (self.start + min(self.length, self.n) - 1) % self.n

    def __contains__(self, v: int) -> bool:
        return (v - self.start) % self.n < self.length

    def within(self, other: "Arc") -> bool:
        if other.length >= self.n:
            return True
        return (self.start - other.start) % self.n + self.length <= other.length

    def meets(self, other: "Arc") -> bool:
        return any(v in other for v in self.nodes)


def arc_of(index: int, nodes: Sequence[int], n: int) -> Arc:
    """Arc covering ``nodes`` listed in either walking direction from the origin."""
    if len(nodes) >= n:
        return Arc(index, nodes[0], n, n)
    first, last = nodes[0], nodes[-1]
    if len(nodes) == 1 or (first + len(nodes) - 1) % n == last:
        return Arc(index, first, len(nodes), n)
    return Arc(index, last, len(nodes), n)


@dataclass
class RingCover:
    n: int
    arcs: list[Arc]                                     # sorted by start
    coloring: dict[int, int] = field(default_factory=dict)   # arc index -> colour 1..3
    home: dict[int, int] = field(default_factory=dict)       # node -> arc index

    def load(self) -> dict[int, int]:
        out = {v: 0 for v in range(self.n)}
        for a in self.arcs:
            for v in a.nodes:
                out[v] += 1
        return out

    def leader(self, arc: Arc) -> int:
        return arc.last

    def home_nodes(self, arc: Arc) -> list[int]:
        return [v for v in arc.nodes if self.home[v] == arc.index]


def _drop_contained(arcs: list[Arc]) -> list[Arc]:
    keep = []
    for a in arcs:
        dominated = False
        for b in arcs:
            if b is a:
                continue
            if a.within(b) and (not b.within(a) or b.index < a.index):
                dominated = True
                break
        if not dominated:
            keep.append(a)
    return keep


def minimal_circle_cover(arcs: Iterable[Arc], n: int | None = None) -> RingCover:
    """Fewest arcs whose union is the ring; ties broken towards the smallest first start."""
    arcs = list(arcs)
    if not arcs:
        raise InvalidInput("no arcs to cover with")
    n = n or arcs[0].n
    full = [a for a in arcs if a.length >= n]
    if full:
        best = [min(full, key=lambda a: a.index)]
        cover = RingCover(n, best)
        _assign_homes(cover)
        return cover
    cand = sorted(_drop_contained(arcs), key=lambda a: a.start)
    m = len(cand)
    starts = [a.start for a in cand]
    best: list[Arc] | None = None
    for first in range(m):
        # arcs in cyclic order after `first`, in relative coordinates
        rel = [(starts[(first + j) % m] - starts[first]) % n for j in range(m)]
        chosen = [cand[first]]
        reach = cand[first].length
        pos = 0
        while reach < n:
            j = bisect.bisect_right(rel, reach) - 1
            if j <= pos:
                break
            pos = j
            nxt = cand[(first + j) % m]
            chosen.append(nxt)
            reach = rel[j] + nxt.length
        if reach < n:
            continue
        if best is None or len(chosen) < len(best):
            best = chosen
    if best is None:
        raise InvalidInput("arcs do not cover the ring")
    cover = RingCover(n, sorted(best, key=lambda a: a.start))
    _assign_homes(cover)
    return cover


def _assign_homes(cover: RingCover) -> None:
    """Each node goes to the earlier ("left") of the arcs containing it."""
    arcs = cover.arcs
    n = cover.n
    if len(arcs) == 1:
        cover.home = {v: arcs[0].index for v in range(n)}
        return
    home = {}
    for j, a in enumerate(arcs):
        prev_end = arcs[j - 1].last
        v = (prev_end + 1) % n
        while True:
            home[v] = a.index
            if v == a.last:
                break
            v = (v + 1) % n
    cover.home = home


def three_color(cover: RingCover) -> dict[int, int]:
    """Colour arcs so that intersecting arcs differ; at most three colours are used."""
    arcs = cover.arcs
    colors: dict[int, int] = {}
    for a in arcs:
        taken = {colors[b.index] for b in arcs if b.index in colors and b is not a and a.meets(b)}
        c = 1
        while c in taken:
            c += 1
        if c > 3:
            raise ColoringImpossible(f"arc {a.index} needs a fourth colour")
        colors[a.index] = c
    cover.coloring = colors
    return colors


def cover_from_intervals(intervals: Sequence, n: int) -> RingCover:
    """Cover built from interval stats (one per origin, indexed by origin)."""
    arcs = [arc_of(st.origin, list(st.nodes), n) for st in intervals]
    cover = minimal_circle_cover(arcs, n)
    three_color(cover)
    return cover
