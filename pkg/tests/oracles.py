"""Independent reference implementations used as test oracles.

Nothing here imports the simulator's algorithms; only plain data is shared.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


# -- operators -------------------------------------------------------------------

def _bits_to_matrix(x: int) -> np.ndarray:
    return np.array([[x & 1, (x >> 1) & 1], [(x >> 2) & 1, (x >> 3) & 1]], dtype=np.int64)


def _matrix_to_bits(m: np.ndarray) -> int:
    m = m % 2
    return int(m[0, 0]) | int(m[0, 1]) << 1 | int(m[1, 0]) << 2 | int(m[1, 1]) << 3


def _map_of(x: int) -> list[int]:
    return [(x >> (3 * k)) & 7 for k in range(8)]


def _word_of(table: list[int]) -> int:
    return sum(v << (3 * k) for k, v in enumerate(table))


def fold(name: str, values: list[int], size: int = 16, lane: int = 16) -> int:
    """Left fold of ``values`` under the named operator, computed from first principles."""
    if name == "xor":
        out = 0
        for v in values:
            out ^= v
        return out
    if name == "add":
        lanes = size // lane
        acc = [0] * lanes
        for v in values:
            for j in range(lanes):
                acc[j] = (acc[j] + ((v >> (j * lane)) & ((1 << lane) - 1))) % (1 << lane)
        return sum(a << (j * lane) for j, a in enumerate(acc))
    if name == "matmul2":
        m = np.eye(2, dtype=np.int64)
        for v in values:
            m = (m @ _bits_to_matrix(v)) % 2
        return _matrix_to_bits(m)
    if name == "compose8":
        table = list(range(8))
        for v in values:
            g = _map_of(v)
            table = [g[table[x]] for x in range(8)]   # earlier maps act first
        return _word_of(table)
    raise ValueError(name)


# -- circle covers ---------------------------------------------------------------

def min_circle_cover_size(arcs: list[tuple[int, int]], n: int) -> int:
    """Fewest (start, length) arcs covering the ring 0..n-1, by exhaustive subset search."""
    sets = [frozenset((a + j) % n for j in range(min(ln, n))) for a, ln in arcs]
    everything = frozenset(range(n))
    for r in range(1, len(sets) + 1):
        for combo in itertools.combinations(sets, r):
            if frozenset().union(*combo) == everything:
                return r
    raise ValueError("arcs do not cover the ring")


# -- balls and intervals ---------------------------------------------------------

def bfs_dist(n: int, edges: list[tuple[int, int]], src: int) -> dict[int, int]:
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist, frontier = {src: 0}, [src]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def wheel_interval_scan(bc: list[int], bl: list[int], i: int, s: int) -> tuple[int, int]:
    """(k_cloud, k_link) of the clockwise interval of ``i``; ``bl[j]`` joins j and j+1."""
    n = len(bc)

    def total(k: int) -> int:
        return sum(bc[(i + j) % n] for j in range(k + 1))

    k_cloud = next((k for k in range(n) if (k + 1) * total(k) >= s), n)
    k_link = next((k for k in range(n) if bl[(i + k) % n] < total(k)), n)
    return k_cloud, k_link


# -- brute-force optimal CloudWrite ----------------------------------------------

def brute_force_write_time(n: int, links: list[tuple[int, int, int]], bc: list[int], src: int, s: int,
                           limit: int = 6) -> int | None:
    """Fewest rounds for node ``src`` to get ``s`` bits into the cloud, or None if more than ``limit``.

    Bits are interchangeable, so a state is the count of unwritten bits at each
    node.  Every round each node splits its bits between writing (at most its
    cloud bandwidth), sending on each incident link (at most that link's
    bandwidth) and keeping; sent bits arrive for the next round.  Copying never
    helps a write, so each bit takes a single path.
    """
    out_links: dict[int, list[tuple[int, int]]] = {v: [] for v in range(n)}
    for u, v, w in links:
        out_links[u].append((v, w))
        out_links[v].append((u, w))

    @lru_cache(maxsize=None)
    def splits(v: int, c: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
        """All (written, per-link sent) choices for ``c`` bits at node ``v``."""
        caps = [w for _, w in out_links[v]]
        res = []
        for wr in range(min(c, bc[v]) + 1):
            for sent in itertools.product(*(range(min(cap, c - wr) + 1) for cap in caps)):
                if wr + sum(sent) <= c:
                    res.append((wr, sent))
        return tuple(res)

    start = tuple(s if v == src else 0 for v in range(n))
    if s == 0:
        return 0
    frontier = {start}
    seen = {start}
    for t in range(1, limit + 1):
        nxt = set()
        for state in frontier:
            options = [splits(v, state[v]) for v in range(n)]
            for choice in itertools.product(*options):
                new = [0] * n
                for v, (wr, sent) in enumerate(choice):
                    new[v] += state[v] - wr - sum(sent)
                    for (dst, _), k in zip(out_links[v], sent):
                        new[dst] += k
                key = tuple(new)
                if not any(key):
                    return t
                if key not in seen:
                    seen.add(key)
                    nxt.add(key)
        frontier = nxt
    return None


# connected simple graphs on up to four nodes, one per isomorphism class
SMALL_GRAPHS: list[tuple[int, list[tuple[int, int]]]] = [
    (1, []),
    (2, [(0, 1)]),
    (3, [(0, 1), (1, 2)]),
    (3, [(0, 1), (1, 2), (0, 2)]),
    (4, [(0, 1), (1, 2), (2, 3)]),                          # path
    (4, [(0, 1), (0, 2), (0, 3)]),                          # star
    (4, [(0, 1), (1, 2), (2, 3), (3, 0)]),                  # cycle
    (4, [(0, 1), (1, 2), (2, 0), (2, 3)]),                  # paw
    (4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]),          # diamond
    (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),  # complete
]
