"""Network topologies: processing nodes, local links and a single cloud node."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BrokenRing, FatLinkTooThin, InvalidInput, NonIntegerBandwidth

MODES = ("wheel", "fat", "general")


@dataclass(frozen=True)
class Link:
    u: int
    v: int
    w: int
    directed: bool = False

    def ends(self) -> tuple[int, int]:
        return self.u, self.v


@dataclass
class Topology:
    """Processing nodes 0..n-1, local links and per-node cloud links.

    Cloud links are symmetric: ``cloud[i]`` bits per round in each direction.
    In wheel mode link ``i`` joins node ``i`` to node ``i+1 mod n``.
    """

    n: int
    links: list[Link]
    cloud: list[int]
    mode: str = "general"
    s: int | None = None
    _adj: dict[int, list[tuple[int, int]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(self.n)}
        for idx, ln in enumerate(self.links):
            adj[ln.u].append((ln.v, idx))
            if not ln.directed and ln.u != ln.v:
                adj[ln.v].append((ln.u, idx))
        for v in adj:
            adj[v].sort()
        self._adj = adj

    # -- queries -----------------------------------------------------------
    def bc(self, i: int) -> int:
        return self.cloud[i]

    def capacity(self, link: int, src: int) -> int:
        ln = self.links[link]
        if src == ln.u or (not ln.directed and src == ln.v):
            return ln.w
        return 0

    def out_links(self, u: int) -> list[tuple[int, int]]:
        """(neighbor, link id) pairs usable from ``u``, sorted."""
        return self._adj[u]

    def link_between(self, u: int, v: int) -> int:
        best = None
        for nb, idx in self._adj[u]:
            if nb == v and (best is None or self.links[idx].w > self.links[best].w):
                best = idx
        if best is None:
            raise InvalidInput(f"no link from {u} to {v}")
        return best

    def ring_bw(self, i: int) -> int:
        """Bandwidth of wheel link (i, i+1)."""
        return self.links[i % self.n].w

    def neighbors(self, u: int) -> list[int]:
        return sorted({v for v, _ in self._adj[u] if self.links_positive(u, v)})

    def links_positive(self, u: int, v: int) -> bool:
        return any(nb == v and self.links[idx].w > 0 for nb, idx in self._adj[u])

    def hop_distances(self, src: int, allowed: Iterable[int] | None = None) -> dict[int, int]:
        """BFS hop distances from ``src`` over links with positive bandwidth."""
        allow = None if allowed is None else set(allowed)
        dist = {src: 0}
        dq = deque([src])
        while dq:
            u = dq.popleft()
            for v, idx in self._adj[u]:
                if self.links[idx].w <= 0 or v in dist:
                    continue
                if allow is not None and v not in allow:
                    continue
                dist[v] = dist[u] + 1
                dq.append(v)
        return dist

    def diameter(self, nodes: Iterable[int] | None = None) -> int:
        members = list(range(self.n)) if nodes is None else sorted(set(nodes))
        best = 0
        for v in members:
            d = self.hop_distances(v, members)
            if len(d) < len(members):
                return math.inf  # type: ignore[return-value]
            best = max(best, max(d.values()))
        return best

    def to_json(self) -> dict:
        doc: dict = {"mode": self.mode, "n": self.n, "cloud_bw": list(self.cloud)}
        if self.s is not None:
            doc["s"] = self.s
        if self.mode == "wheel":
            doc["local_bw"] = [ln.w for ln in self.links]
        else:
            doc["edges"] = [[ln.u, ln.v, ln.w] for ln in self.links]
        return doc


def _as_int(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise NonIntegerBandwidth(f"{what}: {x!r} is not an integer")
    if isinstance(x, float):
        if not x.is_integer():
            raise NonIntegerBandwidth(f"{what}: {x!r} is not an integer")
        x = int(x)
    if x < 0:
        raise NonIntegerBandwidth(f"{what}: negative bandwidth {x}")
    return x


def _expand(value, n: int, what: str) -> list[int]:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise InvalidInput(f"{what}: expected {n} entries, got {len(value)}")
        return [_as_int(x, what) for x in value]
    return [_as_int(value, what)] * n


def wheel(n: int, cloud_bw: int | Sequence[int], local_bw: int | Sequence[int], s: int | None = None) -> Topology:
    """Ring of ``n`` nodes where every node also has a cloud link."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    cloud = _expand(cloud_bw, n, "cloud_bw")
    local = _expand(local_bw, n, "local_bw")
    links = [] if n == 1 else [Link(i, (i + 1) % n, local[i]) for i in range(n)]
    return Topology(n=n, links=links, cloud=cloud, mode="wheel", s=s)


def graph(n: int, edges: Iterable[Sequence[int]], cloud_bw: int | Sequence[int], mode: str = "general",
          s: int | None = None, directed: bool = False) -> Topology:
    if n < 1:
        raise InvalidInput("n must be >= 1")
    cloud = _expand(cloud_bw, n, "cloud_bw")
    links = []
    for e in edges:
        if len(e) != 3:
            raise InvalidInput(f"edge {e!r} must be [u, v, w]")
        u, v, w = int(e[0]), int(e[1]), _as_int(e[2], "edge bandwidth")
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise InvalidInput(f"bad edge endpoints {u}, {v}")
        links.append(Link(u, v, w, directed))
    topo = Topology(n=n, links=links, cloud=cloud, mode=mode, s=s)
    return validate(topo)


def validate(topo: Topology) -> Topology:
    if topo.mode not in MODES:
        raise InvalidInput(f"unknown mode {topo.mode!r}")
    if topo.mode == "wheel" and topo.n > 1:
        present = {(ln.u, ln.v) for ln in topo.links}
        for i in range(topo.n):
            if (i, (i + 1) % topo.n) not in present:
                raise BrokenRing(f"missing ring link ({i}, {(i + 1) % topo.n})")
    if topo.mode == "fat":
        if topo.s is None:
            raise InvalidInput("fat-links mode needs the operand size s")
        for ln in topo.links:
            if ln.directed:
                raise InvalidInput("fat links must be symmetric")
            if ln.w < topo.s:
                raise FatLinkTooThin(f"link ({ln.u}, {ln.v}) has w={ln.w} < s={topo.s}")
    return topo


def build_topology(doc: dict) -> Topology:
    """Build and validate a topology from its JSON description."""
    if not isinstance(doc, dict):
        raise InvalidInput("topology description must be an object")
    mode = doc.get("mode", "general")
    if mode in ("fat-links", "fatlinks"):
        mode = "fat"
    try:
        n = int(doc["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput("topology needs an integer n") from exc
    s = doc.get("s")
    if s is not None:
        s = int(s)
    if "cloud_bw" not in doc:
        raise InvalidInput("topology needs cloud_bw")
    if mode == "wheel":
        if "edges" in doc:
            edges = doc["edges"]
            cloud = _expand(doc["cloud_bw"], n, "cloud_bw")
            links = [Link(int(u), int(v), _as_int(w, "edge bandwidth")) for u, v, w in edges]
            return validate(Topology(n=n, links=links, cloud=cloud, mode="wheel", s=s))
        return validate(wheel(n, doc["cloud_bw"], doc.get("local_bw", 0), s=s))
    if mode not in MODES:
        raise InvalidInput(f"unknown mode {mode!r}")
    edges = doc.get("edges")
    if edges is None:
        raise InvalidInput(f"{mode} topology needs an edges list")
    return graph(n, edges, doc["cloud_bw"], mode=mode, s=s)


def load_topology(path: str | Path) -> Topology:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read topology {path}: {exc}") from exc
    return build_topology(doc)
