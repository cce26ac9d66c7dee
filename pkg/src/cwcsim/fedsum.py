"""Masked federated summation on a wheel.

Node i draws a mask z_i, sends it to node i+1 and publishes
y_i = x_i - z_i + z_{i-1} (mod M); masks cancel in the sum, so the cloud ends
up with sum_i x_i while no link ever carries an unmasked x_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import InitialState, run_schedule
from .errors import InvalidInput, OutOfRange
from .operators import add_op
from .router import Router
from .schedule import Piece
from .topology import Topology, wheel
from .wheel_combining import combined_write_modular


def lane_bits(modulus: int) -> int:
    return max(1, math.ceil(math.log2(modulus)))


def _check(xs: Sequence[Sequence[int]], modulus: int) -> tuple[int, int]:
    if modulus < 2:
        raise InvalidInput("modulus must be at least 2")
    if not xs:
        raise InvalidInput("need at least one node")
    m = len(xs[0])
    if m < 1 or any(len(x) != m for x in xs):
        raise InvalidInput("all vectors must share a positive length")
    for x in xs:
        for c in x:
            if not 0 <= int(c) < modulus:
                raise OutOfRange(f"entry {c} outside [0, {modulus})")
    return len(xs), m


def masks(n: int, m: int, modulus: int, seed: int) -> list[np.ndarray]:
    """Per-node masks; node i's generator is seeded with ``seed XOR i``."""
    return [np.random.default_rng(seed ^ i).integers(0, modulus, size=m, dtype=np.int64) for i in range(n)]


def mask_inputs(xs: Sequence[Sequence[int]], modulus: int, seed: int) -> list[list[int]]:
    n, m = _check(xs, modulus)
    z = masks(n, m, modulus, seed)
    out = []
    for i, x in enumerate(xs):
        y = (np.asarray(x, dtype=np.int64) - z[i] + z[(i - 1) % n]) % modulus
        out.append([int(c) for c in y])
    return out


def pack(vec: Sequence[int], lane: int) -> int:
    return sum(int(c) << (k * lane) for k, c in enumerate(vec))


def unpack(word: int, m: int, lane: int) -> list[int]:
    mask = (1 << lane) - 1
    return [(word >> (k * lane)) & mask for k in range(m)]


@dataclass
class MaskedRound:
    modulus: int
    m: int
    xs: list[list[int]]
    ys: list[list[int]]
    aggregate: list[int]
    rounds: int
    exchange_rounds: int
    combine_rounds: int
    info: dict = field(default_factory=dict)


def _exchange(topo: Topology, m: int, lane: int) -> tuple[int, set[str]]:
    """Node i ships its m*lane-bit mask to node i+1; returns (rounds, payloads that crossed links)."""
    n = topo.n
    if n == 1:
        return 0, set()
    size = m * lane
    router = Router(topo)
    init = InitialState()
    for i in range(n):
        init.add_payload(f"z{i}", size, None, holder=i)
        init.add_payload(f"x{i}", size, None, holder=i)
        router.push(Piece(f"z{i}", 0, size), [("S", i, (i + 1) % n, i)], 1)
    router.run()
    trace = run_schedule(topo, router.builder.build(), init)
    for i in range(n):
        assert trace.holds((i + 1) % n, f"z{i}")
    return trace.rounds_elapsed, trace.sent_payloads


def federated_sum(xs: Sequence[Sequence[int]], modulus: int, seed: int, topo: Topology | None = None,
                  cloud_bw: int = 2, local_bw: int = 64) -> MaskedRound:
    """Aggregate sum_i x_i (mod M) in the cloud through modular combining of the masked vectors."""
    n, m = _check(xs, modulus)
    topo = topo or wheel(n, cloud_bw, local_bw)
    if topo.mode != "wheel" or topo.n != n:
        raise InvalidInput("federated summation needs a wheel with one node per vector")
    lane = lane_bits(modulus)
    ys = mask_inputs(xs, modulus, seed)
    ex_rounds, ex_sent = _exchange(topo, m, lane)
    op = add_op(m * lane, lane, modulus)
    out = combined_write_modular(topo, op, [pack(y, lane) for y in ys])
    aggregate = unpack(out.value, m, lane)
    sent = set(ex_sent) | set(out.trace.sent_payloads)
    leaked = sorted(p for p in sent if p.startswith("x"))
    return MaskedRound(modulus, m, [list(map(int, x)) for x in xs], ys, aggregate,
                       ex_rounds + out.rounds, ex_rounds, out.rounds,
                       {"sent_payloads": sent, "leaked": leaked, "lane": lane})


def random_inputs(n: int, m: int, modulus: int, seed: int) -> list[list[int]]:
    rng = np.random.default_rng(seed)
    return [[int(c) for c in rng.integers(0, modulus, size=m)] for _ in range(n)]
