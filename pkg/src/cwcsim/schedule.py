"""Schedule data model: per-round sends, cloud reads/writes and local computations."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional


class Piece(NamedTuple):
    """Bits ``[lo, hi)`` of a named payload."""

    payload: str
    lo: int
    hi: int

    @property
    def bits(self) -> int:
        return self.hi - self.lo


@dataclass(frozen=True)
class Send:
    src: int
    dst: int
    link: int
    pieces: tuple[Piece, ...]
    ctl: int = 0

    @property
    def bits(self) -> int:
        return sum(p.bits for p in self.pieces) + self.ctl


@dataclass(frozen=True)
class Write:
    node: int
    file: str
    offset: int
    piece: Piece


@dataclass(frozen=True)
class Read:
    node: int
    file: str
    lo: int
    hi: int


@dataclass(frozen=True)
class Compute:
    """Local computation, executed at the end of its round (free of charge)."""

    node: int
    out: str
    inputs: tuple[str, ...]
    size: int
    fn: Optional[Callable[..., int]] = field(default=None, compare=False)
    label: str = ""


Action = Send | Write | Read | Compute


@dataclass
class Schedule:
    rounds: dict[int, list[Action]] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        active = [t for t, acts in self.rounds.items() if acts]
        return max(active) if active else 0

    def actions(self) -> Iterable[tuple[int, Action]]:
        for t in sorted(self.rounds):
            for a in self.rounds[t]:
                yield t, a

    def to_json(self) -> dict:
        out = []
        for t, a in self.actions():
            if isinstance(a, Send):
                out.append({"t": t, "op": "send", "src": a.src, "dst": a.dst, "link": a.link, "ctl": a.ctl,
                            "pieces": [[p.payload, p.lo, p.hi] for p in a.pieces]})
            elif isinstance(a, Write):
                out.append({"t": t, "op": "write", "node": a.node, "file": a.file, "offset": a.offset,
                            "piece": [a.piece.payload, a.piece.lo, a.piece.hi]})
            elif isinstance(a, Read):
                out.append({"t": t, "op": "read", "node": a.node, "file": a.file, "lo": a.lo, "hi": a.hi})
            else:
                out.append({"t": t, "op": "compute", "node": a.node, "out": a.out, "inputs": list(a.inputs),
                            "label": a.label})
        return {"horizon": self.horizon, "actions": out}


class RangeSet:
    """Sorted disjoint half-open integer ranges."""

    __slots__ = ("starts", "ends")

    def __init__(self, ranges: Iterable[tuple[int, int]] = ()) -> None:
        self.starts: list[int] = []
        self.ends: list[int] = []
        for lo, hi in ranges:
            self.add(lo, hi)

    def add(self, lo: int, hi: int) -> None:
        if hi <= lo:
            return
        i = bisect.bisect_left(self.ends, lo)
        j = bisect.bisect_right(self.starts, hi)
        if i < j:
            lo = min(lo, self.starts[i])
            hi = max(hi, self.ends[j - 1])
        self.starts[i:j] = [lo]
        self.ends[i:j] = [hi]

    def contains(self, lo: int, hi: int) -> bool:
        if hi <= lo:
            return True
        i = bisect.bisect_right(self.starts, lo) - 1
        return i >= 0 and self.ends[i] >= hi

    def overlaps(self, lo: int, hi: int) -> bool:
        i = bisect.bisect_right(self.starts, lo) - 1
        if i >= 0 and self.ends[i] > lo:
            return True
        j = bisect.bisect_left(self.starts, lo)
        return j < len(self.starts) and self.starts[j] < hi

    def total(self) -> int:
        return sum(e - s for s, e in zip(self.starts, self.ends))

    def __iter__(self):
        return iter(zip(self.starts, self.ends))


class ScheduleBuilder:
    """Accumulates actions; sends over the same link in the same round are merged."""

    def __init__(self) -> None:
        self._sends: dict[tuple[int, int, int, int], list] = {}
        self._other: dict[int, list[Action]] = {}
        self._order: list[tuple[int, tuple]] = []

    def send(self, t: int, src: int, dst: int, link: int, piece: Piece | None, ctl: int = 0) -> None:
        key = (t, src, dst, link)
        entry = self._sends.get(key)
        if entry is None:
            entry = [[], 0]
            self._sends[key] = entry
        if piece is not None:
            pieces = entry[0]
            if pieces and pieces[-1].payload == piece.payload and pieces[-1].hi == piece.lo:
                pieces[-1] = Piece(piece.payload, pieces[-1].lo, piece.hi)
            else:
                pieces.append(piece)
        entry[1] += ctl

    def write(self, t: int, node: int, file: str, offset: int, piece: Piece) -> None:
        self._other.setdefault(t, []).append(Write(node, file, offset, piece))

    def read(self, t: int, node: int, file: str, lo: int, hi: int) -> None:
        self._other.setdefault(t, []).append(Read(node, file, lo, hi))

    def compute(self, t: int, node: int, out: str, inputs: Iterable[str], size: int,
                fn: Callable[..., int] | None, label: str = "") -> None:
        self._other.setdefault(t, []).append(Compute(node, out, tuple(inputs), size, fn, label))

    def build(self) -> Schedule:
        rounds: dict[int, list[Action]] = {}
        for (t, src, dst, link), (pieces, ctl) in sorted(self._sends.items(), key=lambda kv: kv[0]):
            rounds.setdefault(t, []).append(Send(src, dst, link, tuple(pieces), ctl))
        for t, acts in sorted(self._other.items()):
            rounds.setdefault(t, []).extend(acts)
        return Schedule(rounds=dict(sorted(rounds.items())))


def reverse_write(sched: Schedule, file: str, written: str, read_as: str) -> Schedule:
    """Time-reversal of a schedule that writes payload ``written`` into ``file``.

    Round t becomes round T+1-t, every send travels back over the same link,
    every write becomes a read of the same file range and control bits keep
    their size.  The reversed sends carry the bits of ``read_as`` (the payload
    stored in ``file`` from offset 0) that the original pieces were written to.
    Local links must be symmetric for the result to be feasible.
    """
    layout = sorted((a.piece.lo, a.piece.hi, a.offset) for _, a in sched.actions()
                    if isinstance(a, Write) and a.file == file and a.piece.payload == written)
    starts = [lo for lo, _, _ in layout]

    def translate(p: Piece) -> list[Piece]:
        if p.payload != written:
            raise ValueError(f"cannot reverse a send of payload {p.payload!r}")
        out, k = [], max(0, bisect.bisect_right(starts, p.lo) - 1)
        while k < len(layout) and layout[k][0] < p.hi:
            lo, hi, off = layout[k]
            a, b = max(lo, p.lo), min(hi, p.hi)
            if a < b:
                out.append(Piece(read_as, off + a - lo, off + b - lo))
            k += 1
        if sum(q.bits for q in out) != p.bits:
            raise ValueError("sent bits that are never written cannot be reversed")
        return out

    horizon = sched.horizon
    b = ScheduleBuilder()
    for t, a in sched.actions():
        rt = horizon + 1 - t
        if isinstance(a, Send):
            for p in a.pieces:
                for q in translate(p):
                    b.send(rt, a.dst, a.src, a.link, q)
            if a.ctl or not a.pieces:
                b.send(rt, a.dst, a.src, a.link, None, a.ctl)
        elif isinstance(a, Write):
            if a.file == file:
                b.read(rt, a.node, file, a.offset, a.offset + a.piece.bits)
        else:
            raise ValueError(f"cannot reverse {type(a).__name__} actions")
    return b.build()
