"""Synchronous round engine with exact bandwidth accounting and passive cloud storage.

Round semantics: every transfer of round ``t`` uses bits held at the start of
the round; received bits become usable in round ``t+1``.  Computations listed
in round ``t`` run after that round's transfers, so a node may compute on bits
it just received and forward the result in the next round.
"""
from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (BandwidthExceeded, CausalityViolation, FileMissing, OverlappingCloudWrite,
                     ReadWriteConflict, ScheduleViolation)
from .schedule import Compute, Piece, RangeSet, Read, Schedule, Send, Write
from .topology import Topology


@dataclass
class InitialState:
    payloads: dict[str, tuple[int, int | None]] = field(default_factory=dict)
    memory: dict[int, list[str]] = field(default_factory=dict)
    cloud: dict[str, str] = field(default_factory=dict)

    def add_payload(self, name: str, size: int, value: int | None, holder: int | None = None) -> None:
        self.payloads[name] = (size, value)
        if holder is not None:
            self.memory.setdefault(holder, []).append(name)


class CloudFile:
    """Range-addressed file; each segment remembers which payload bits it holds."""

    def __init__(self) -> None:
        # parallel sorted arrays of disjoint segments [start, end) -> payload bits from plo
        self.starts: list[int] = []
        self.ends: list[int] = []
        self.payloads: list[str] = []
        self.plos: list[int] = []
        self.cover = RangeSet()

    @property
    def segments(self) -> list[tuple[int, int, str, int]]:
        return list(zip(self.starts, self.ends, self.payloads, self.plos))

    def put(self, flo: int, piece: Piece) -> None:
        fhi = flo + piece.bits
        if fhi <= flo:
            return
        i = bisect.bisect_right(self.ends, flo)
        j = bisect.bisect_left(self.starts, fhi)
        new_s, new_e, new_p, new_o = [], [], [], []
        if i < j:
            a, p, plo = self.starts[i], self.payloads[i], self.plos[i]
            if a < flo:
                new_s.append(a), new_e.append(flo), new_p.append(p), new_o.append(plo)
        new_s.append(flo), new_e.append(fhi), new_p.append(piece.payload), new_o.append(piece.lo)
        if i < j:
            a, b, p, plo = self.starts[j - 1], self.ends[j - 1], self.payloads[j - 1], self.plos[j - 1]
            if b > fhi:
                new_s.append(fhi), new_e.append(b), new_p.append(p), new_o.append(plo + (fhi - a))
        self.starts[i:j] = new_s
        self.ends[i:j] = new_e
        self.payloads[i:j] = new_p
        self.plos[i:j] = new_o
        self.cover.add(flo, fhi)

    def get(self, lo: int, hi: int) -> list[Piece]:
        if not self.cover.contains(lo, hi):
            raise FileMissing(f"range [{lo}, {hi}) not fully written")
        out = []
        i = bisect.bisect_right(self.ends, lo)
        while i < len(self.starts) and self.starts[i] < hi:
            a, b = self.starts[i], self.ends[i]
            x, y = max(a, lo), min(b, hi)
            if x < y:
                plo = self.plos[i]
                out.append(Piece(self.payloads[i], plo + (x - a), plo + (y - a)))
            i += 1
        return out

    @property
    def size(self) -> int:
        return self.cover.ends[-1] if self.cover.ends else 0


class CloudStore:
    def __init__(self) -> None:
        self.files: dict[str, CloudFile] = {}
        self.write_ledger: list[tuple[int, int, str, int, int]] = []
        self.read_ledger: list[tuple[int, int, str, int, int]] = []

    def file(self, name: str) -> CloudFile:
        if name not in self.files:
            raise FileMissing(f"no cloud file {name!r}")
        return self.files[name]


@dataclass
class RunTrace:
    rounds_elapsed: int
    memory: dict[int, dict[str, RangeSet]]
    cloud: CloudStore
    values: dict[str, tuple[int, int | None]]
    utilization: list[dict[str, int]]
    sent_payloads: set[str]

    def holds(self, node: int, payload: str) -> bool:
        size = self.values[payload][0]
        rs = self.memory.get(node, {}).get(payload)
        return size == 0 or (rs is not None and rs.contains(0, size))

    def payload_value(self, name: str) -> int | None:
        return self.values[name][1]

    def file_value(self, name: str, size: int | None = None) -> int | None:
        f = self.cloud.file(name)
        n = f.size if size is None else size
        if not f.cover.contains(0, n):
            raise FileMissing(f"file {name!r} incomplete")
        out = 0
        for a, b, p, plo in f.segments:
            if a >= n:
                break
            b = min(b, n)
            v = self.values[p][1]
            if v is None:
                return None
            out |= ((v >> plo) & ((1 << (b - a)) - 1)) << a
        return out

    def file_complete(self, name: str, size: int) -> bool:
        return name in self.cloud.files and self.cloud.files[name].cover.contains(0, size)


def run_schedule(topo: Topology, sched: Schedule, init: InitialState | None = None) -> RunTrace:
    """Execute ``sched`` round by round, enforcing bandwidth, causality and cloud rules."""
    init = init or InitialState()
    values = dict(init.payloads)
    memory: dict[int, dict[str, RangeSet]] = defaultdict(dict)
    for node, names in init.memory.items():
        for name in names:
            memory[node][name] = RangeSet([(0, values[name][0])])
    cloud = CloudStore()
    for fname, pname in init.cloud.items():
        f = CloudFile()
        size = values[pname][0]
        if size:
            f.put(0, Piece(pname, 0, size))
        cloud.files[fname] = f

    def holds(node: int, p: Piece) -> bool:
        if p.payload not in values:
            return False
        if p.lo < 0 or p.hi > values[p.payload][0]:
            return False
        rs = memory[node].get(p.payload)
        return p.bits == 0 or (rs is not None and rs.contains(p.lo, p.hi))

    last = 0
    util: list[dict[str, int]] = []
    sent_payloads: set[str] = set()
    for t in sorted(sched.rounds):
        acts = sched.rounds[t]
        if not acts:
            continue
        if t < 0:
            raise ScheduleViolation(f"negative round {t}")
        transfers = [a for a in acts if not isinstance(a, Compute)]
        if t == 0 and transfers:
            raise ScheduleViolation("round 0 admits computations only")
        used: dict[tuple, int] = defaultdict(int)
        written_now: dict[str, RangeSet] = defaultdict(RangeSet)
        read_files: set[str] = set()
        deliveries: list[tuple[int, Piece]] = []
        puts: list[tuple[str, int, Piece]] = []
        stats = {"round": t, "local": 0, "up": 0, "down": 0}
        for a in transfers:
            if isinstance(a, Send):
                for p in a.pieces:
                    if not holds(a.src, p):
                        raise CausalityViolation(f"round {t}: node {a.src} sends {p} it does not hold")
                    sent_payloads.add(p.payload)
                    deliveries.append((a.dst, p))
                ln = topo.links[a.link]
                if {a.src, a.dst} != {ln.u, ln.v} or (ln.directed and a.src != ln.u):
                    raise ScheduleViolation(f"round {t}: link {a.link} does not join {a.src}->{a.dst}")
                key = ("L", a.link, a.src)
                used[key] += a.bits
                stats["local"] += a.bits
                if used[key] > topo.capacity(a.link, a.src):
                    raise BandwidthExceeded(f"round {t}: link {a.link} from {a.src} carries {used[key]} bits")
            elif isinstance(a, Write):
                p = a.piece
                if not holds(a.node, p):
                    raise CausalityViolation(f"round {t}: node {a.node} writes {p} it does not hold")
                rs = written_now[a.file]
                if rs.overlaps(a.offset, a.offset + p.bits):
                    raise OverlappingCloudWrite(f"round {t}: overlapping writes to {a.file!r}")
                rs.add(a.offset, a.offset + p.bits)
                key = ("U", a.node)
                used[key] += p.bits
                stats["up"] += p.bits
                if used[key] > topo.bc(a.node):
                    raise BandwidthExceeded(f"round {t}: node {a.node} writes {used[key]} bits")
                puts.append((a.file, a.offset, p))
                cloud.write_ledger.append((t, a.node, a.file, a.offset, a.offset + p.bits))
            elif isinstance(a, Read):
                if a.file not in cloud.files:
                    raise FileMissing(f"round {t}: node {a.node} reads missing file {a.file!r}")
                try:
                    got = cloud.files[a.file].get(a.lo, a.hi)
                except FileMissing as exc:
                    raise FileMissing(f"round {t}: {exc}") from exc
                read_files.add(a.file)
                key = ("D", a.node)
                used[key] += a.hi - a.lo
                stats["down"] += a.hi - a.lo
                if used[key] > topo.bc(a.node):
                    raise BandwidthExceeded(f"round {t}: node {a.node} reads {used[key]} bits")
                deliveries.extend((a.node, p) for p in got)
                cloud.read_ledger.append((t, a.node, a.file, a.lo, a.hi))
            else:  # pragma: no cover - guarded by the type union
                raise ScheduleViolation(f"unknown action {a!r}")
        clash = read_files & set(written_now)
        if clash:
            raise ReadWriteConflict(f"round {t}: file(s) {sorted(clash)} read and written together")
        for node, p in deliveries:
            memory[node].setdefault(p.payload, RangeSet()).add(p.lo, p.hi)
        for fname, off, p in puts:
            cloud.files.setdefault(fname, CloudFile()).put(off, p)
        for a in acts:
            if isinstance(a, Compute):
                _compute(a, t, memory, values)
        last = t
        util.append(stats)
    return RunTrace(last, dict(memory), cloud, values, util, sent_payloads)


def _compute(a: Compute, t: int, memory, values) -> None:
    ins = []
    for name in a.inputs:
        if name not in values:
            raise CausalityViolation(f"round {t}: unknown payload {name!r}")
        size, val = values[name]
        rs = memory[a.node].get(name)
        if size and (rs is None or not rs.contains(0, size)):
            raise CausalityViolation(f"round {t}: node {a.node} computes on {name!r} it does not hold")
        ins.append(val)
    if a.out in values:
        raise ScheduleViolation(f"round {t}: payload {a.out!r} computed twice")
    val = None
    if a.fn is not None and all(v is not None for v in ins):
        val = a.fn(*ins)
    values[a.out] = (a.size, val)
    memory[a.node][a.out] = RangeSet([(0, a.size)])


def cut_capacity(topo: Topology, side: Iterable[int], to_cloud: bool = True) -> int:
    """Per-round capacity leaving node set ``side`` (local links out plus its cloud uplinks)."""
    inside = set(side)
    cap = 0
    for idx, ln in enumerate(topo.links):
        if ln.u in inside and ln.v not in inside:
            cap += ln.w
        elif not ln.directed and ln.v in inside and ln.u not in inside:
            cap += ln.w
    if to_cloud:
        cap += sum(topo.bc(i) for i in inside)
    return cap
