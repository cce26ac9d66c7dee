"""Associative combining operators over fixed-size bit strings.

Values are Python ints; bit ``j`` of the operand is ``(x >> j) & 1``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Callable, Sequence

from .errors import InvalidInput


@dataclass(frozen=True)
class CombineOp:
    name: str
    size: int
    apply: Callable[[int, int], int] = field(compare=False)
    unit: int
    commutative: bool
    grains: tuple[int, ...] | None = None
    grain_apply: Callable[[int, int, int], int] | None = field(default=None, compare=False)

    @property
    def modular(self) -> bool:
        return self.grains is not None

    def grain_layout(self) -> list[tuple[int, int]]:
        """(offset, width) for every grain; a holistic operator is a single grain."""
        return self._layout

    @cached_property
    def _layout(self) -> list[tuple[int, int]]:
        widths = self.grains if self.grains is not None else (self.size,)
        out, off = [], 0
        for w in widths:
            out.append((off, w))
            off += w
        return out

    @property
    def grain_size(self) -> int:
        return max(w for _, w in self.grain_layout())

    def apply_grain(self, j: int, a: int, b: int) -> int:
        """Product of grain ``j`` of two operands (arguments are the grain bits alone)."""
        if self.grain_apply is None:
            return self.apply(a, b)
        return self.grain_apply(j, a, b)

    def fold(self, values: Sequence[int]) -> int:
        return reduce(self.apply, values, self.unit)

    def random_value(self, rng: random.Random) -> int:
        return rng.getrandbits(self.size) if self.size else 0

    def grain_bits(self, x: int, j: int) -> int:
        off, w = self.grain_layout()[j]
        return (x >> off) & ((1 << w) - 1)


def xor_op(size: int, grain: int | None = None) -> CombineOp:
    grain = grain or size
    return CombineOp("xor", size, lambda a, b: a ^ b, 0, True, _even_grains(size, grain),
                     lambda j, a, b: a ^ b)


def add_op(size: int = 16, lane: int | None = None, modulus: int | None = None) -> CombineOp:
    """Lane-wise addition; lanes of ``lane`` bits, each modulo ``modulus`` (default 2**lane)."""
    lane = lane or size
    if size % lane:
        raise InvalidInput(f"size {size} is not a multiple of lane width {lane}")
    mod = modulus or (1 << lane)
    if mod > (1 << lane):
        raise InvalidInput("modulus does not fit the lane width")
    lanes = size // lane
    mask = (1 << lane) - 1

    def lane_add(a: int, b: int) -> int:
        return ((a & mask) + (b & mask)) % mod

    def apply(a: int, b: int) -> int:
        out = 0
        for k in range(lanes):
            sh = k * lane
            out |= lane_add(a >> sh, b >> sh) << sh
        return out

    name = "add" if modulus is None else f"add_mod{modulus}"
    return CombineOp(name, size, apply, 0, True, tuple([lane] * lanes), lambda j, a, b: lane_add(a, b))


def _even_grains(size: int, grain: int) -> tuple[int, ...]:
    full, rest = divmod(size, grain)
    return tuple([grain] * full + ([rest] if rest else []))


# 2x2 matrices over GF(2): bit 0 = a11, 1 = a12, 2 = a21, 3 = a22
def _mat_mul(x: int, y: int) -> int:
    a11, a12, a21, a22 = (x >> 0) & 1, (x >> 1) & 1, (x >> 2) & 1, (x >> 3) & 1
    b11, b12, b21, b22 = (y >> 0) & 1, (y >> 1) & 1, (y >> 2) & 1, (y >> 3) & 1
    c11 = (a11 & b11) ^ (a12 & b21)
    c12 = (a11 & b12) ^ (a12 & b22)
    c21 = (a21 & b11) ^ (a22 & b21)
    c22 = (a21 & b12) ^ (a22 & b22)
    return c11 | (c12 << 1) | (c21 << 2) | (c22 << 3)


def matmul2_op() -> CombineOp:
    return CombineOp("matmul2", 4, _mat_mul, 0b1001, False)


# maps on {0..7}: entry x (3 bits) at bit offset 3*x
def _compose(f: int, g: int) -> int:
    """Apply ``f`` first, then ``g``."""
    out = 0
    for x in range(8):
        fx = (f >> (3 * x)) & 7
        out |= ((g >> (3 * fx)) & 7) << (3 * x)
    return out


IDENTITY8 = sum(x << (3 * x) for x in range(8))


def compose8_op() -> CombineOp:
    return CombineOp("compose8", 24, _compose, IDENTITY8, False)


def make_op(name: str, size: int | None = None, grain: int | None = None) -> CombineOp:
    if name == "xor":
        return xor_op(size or 16, grain)
    if name == "add":
        if size is None:
            return add_op(16)
        return add_op(size, grain or (16 if size % 16 == 0 else size))
    if name == "matmul2":
        return matmul2_op()
    if name == "compose8":
        return compose8_op()
    raise InvalidInput(f"unknown operator {name!r}")


BATTERY = ("xor", "add", "matmul2", "compose8")
