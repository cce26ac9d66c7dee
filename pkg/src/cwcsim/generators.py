"""Seeded topology generators used by sweeps and tests."""
from __future__ import annotations

import random

from .topology import Topology, graph, wheel


def random_wheel(seed: int, n: int, bc_range: tuple[int, int] = (1, 4),
                 bl_range: tuple[int, int] = (1, 16)) -> Topology:
    rng = random.Random(seed)
    return wheel(n, [rng.randint(*bc_range) for _ in range(n)], [rng.randint(*bl_range) for _ in range(n)])


def _connected_edges(rng: random.Random, n: int, extra: float) -> set[tuple[int, int]]:
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for j in range(1, n):
        u, v = order[j], order[rng.randrange(j)]
        edges.add((min(u, v), max(u, v)))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < extra:
                edges.add((u, v))
    return edges


def random_fat_graph(seed: int, n: int, s: int, bc_range: tuple[int, int] = (0, 4),
                     extra: float = 0.08, slack: int = 2) -> Topology:
    """Connected random graph whose links all carry at least ``s`` bits per round."""
    rng = random.Random(seed)
    edges = _connected_edges(rng, n, extra)
    cloud = [rng.randint(*bc_range) for _ in range(n)]
    if not any(cloud):
        cloud[rng.randrange(n)] = max(1, bc_range[1])
    links = [[u, v, s + rng.randint(0, slack * s)] for u, v in sorted(edges)]
    return graph(n, links, cloud, mode="fat", s=s)


def random_graph(seed: int, n: int, bc_range: tuple[int, int] = (0, 3), bl_range: tuple[int, int] = (1, 8),
                 extra: float = 0.15) -> Topology:
    rng = random.Random(seed)
    edges = _connected_edges(rng, n, extra)
    cloud = [rng.randint(*bc_range) for _ in range(n)]
    if not any(cloud):
        cloud[rng.randrange(n)] = max(1, bc_range[1])
    return graph(n, [[u, v, rng.randint(*bl_range)] for u, v in sorted(edges)], cloud)


def ring_of_cliques(cliques: int, size: int, s: int, cloud_bw: int = 1) -> Topology:
    """``cliques`` complete graphs of ``size`` nodes joined in a ring by single links."""
    n = cliques * size
    edges = []
    for c in range(cliques):
        base = c * size
        for a in range(size):
            for b in range(a + 1, size):
                edges.append([base + a, base + b, s])
        nxt = ((c + 1) % cliques) * size
        if cliques > 1 and not (cliques == 2 and c == 1):
            edges.append([base + size - 1, nxt, s])
    return graph(n, edges, cloud_bw, mode="fat", s=s)
