"""Cloud clusters, sparse covers, combining and dissemination on fat-links graphs.

Every local link carries at least s bits per round, so a whole operand crosses
a link in one round.  Each node's cloud cluster is the smallest hop ball whose
cloud bandwidth, balanced against its radius, can absorb s bits.  Combining
first convergecasts inside every cluster of a (sparse) cover, then walks a
binary computation tree through cloud files, one tree height at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .engine import CloudFile, InitialState, run_schedule
from .errors import (FatLinkTooThin, FileMissing, InvalidInput, InvalidKappa, OperatorNotCommutative,
                     ZeroCloudBandwidthEverywhere)
from .flow import _pair_links, flow_read, flow_write, reach_lower_bound
from .operators import CombineOp
from .router import Counter, Router, Tree, TreeWriter, bfs_tree, tree_read, tree_write
from .schedule import Piece, reverse_write
from .topology import Topology
from .wheel import Measured
from .wheel_combining import CombineOutcome, TreeNode, clog2, computation_tree, internal_nodes


# -- clusters ------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterStats:
    origin: int
    s: int
    k: int                      # radius
    nodes: tuple[int, ...]      # ball members ordered by (distance, id)
    bc_total: int
    Z: float

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def members(self) -> frozenset[int]:
        return frozenset(self.nodes)


def compute_cloud_cluster(topo: Topology, i: int, s: int, diameter: int | None = None) -> ClusterStats:
    """Smallest radius k with (k+1) * b_c(ball_k(i)) >= s, capped at the graph diameter."""
    dist = topo.hop_distances(i)
    diam = topo.diameter() if diameter is None else diameter
    reach = max(dist.values())
    cap = reach if diam == math.inf else min(diam, reach)
    order = sorted(dist, key=lambda v: (dist[v], v))
    k = cap
    for r in range(cap + 1):
        bc = sum(topo.bc(v) for v in order if dist[v] <= r)
        if (r + 1) * bc >= s:
            k = r
            break
    nodes = tuple(v for v in order if dist[v] <= k)
    bc_total = sum(topo.bc(v) for v in nodes)
    if bc_total == 0 and s > 0:
        raise ZeroCloudBandwidthEverywhere(f"no cloud bandwidth within reach of node {i}")
    Z = k + (s / bc_total if s else 0.0)
    return ClusterStats(i, s, k, nodes, bc_total, Z)


def all_cloud_clusters(topo: Topology, s: int) -> list[ClusterStats]:
    diam = topo.diameter()
    return [compute_cloud_cluster(topo, i, s, diam) for i in range(topo.n)]


def graph_zmax(topo: Topology, s: int) -> float:
    return max(c.Z for c in all_cloud_clusters(topo, s))


def cluster_lower_bound(topo: Topology, i: int, s: int) -> int:
    """Fewest rounds in which any schedule could move s bits between node ``i`` and the cloud.

    A node at hop distance d can use at most T - d of the first T rounds.
    """
    if s <= 0:
        return 0
    return reach_lower_bound(topo, _pair_links(topo), {i: s})


def _check_fat(topo: Topology, s: int) -> None:
    for ln in topo.links:
        if ln.directed:
            raise InvalidInput("fat links must be symmetric")
        if ln.w < s:
            raise FatLinkTooThin(f"link ({ln.u}, {ln.v}) has w={ln.w} < s={s}")
    if topo.diameter() == math.inf:
        raise InvalidInput("the local graph is disconnected")


def _cluster_tree(topo: Topology, root: int, members: Iterable[int] | None) -> Tree:
    return bfs_tree(topo, root, members)


def cloud_write_cluster(topo: Topology, i: int, s: int, members: Iterable[int] | None = None,
                        value: int | None = None, detail: bool = False):
    """Node ``i`` writes its s-bit payload through a BFS tree of its cluster (or ``members``)."""
    if members is None:
        members = compute_cloud_cluster(topo, i, s).nodes
    tree = _cluster_tree(topo, i, members)
    router = Router(topo)
    if s > 0:
        tree_write(router, tree, "S", [(Piece("S", 0, s), 1)], 1)
    router.run()
    init = InitialState()
    init.add_payload("S", s, value, holder=i)
    trace = run_schedule(topo, router.builder.build(), init)
    if s > 0 and not trace.file_complete("S", s):
        raise FileMissing("cloud file incomplete after CloudWrite")
    if not detail:
        return trace.rounds_elapsed
    return Measured(trace.file_value("S", s) if s else 0, trace.rounds_elapsed, trace, {"tree": tree})


def cloud_read_cluster(topo: Topology, i: int, s: int, members: Iterable[int] | None = None,
                       value: int | None = None, detail: bool = False):
    """Node ``i`` reads an s-bit cloud file: the time-reversal of its in-cluster CloudWrite."""
    if members is None:
        members = compute_cloud_cluster(topo, i, s).nodes
    tree = _cluster_tree(topo, i, members)
    router = Router(topo)
    if s > 0:
        tree_write(router, tree, "F", [(Piece("S", 0, s), 1)], 1)
    router.run()
    init = InitialState()
    init.add_payload("F", s, value)
    init.cloud["F"] = "F"
    trace = run_schedule(topo, reverse_write(router.builder.build(), "F", "S", "F"), init)
    if s > 0 and not trace.holds(i, "F"):
        raise FileMissing("reader does not hold the file after CloudRead")
    if not detail:
        return trace.rounds_elapsed
    return Measured(trace.payload_value("F"), trace.rounds_elapsed, trace, {"tree": tree})


# -- covers --------------------------------------------------------------------

@dataclass
class GraphCover:
    n: int
    clusters: list[tuple[int, ...]]                   # sorted member tuples
    leaders: list[int] = field(default_factory=list)
    timespans: list[float] = field(default_factory=list)

    @property
    def home(self) -> dict[int, int]:
        """Each node belongs to the first cluster containing it."""
        out: dict[int, int] = {}
        for c, members in enumerate(self.clusters):
            for v in members:
                out.setdefault(v, c)
        return out

    def load(self) -> dict[int, int]:
        out = {v: 0 for v in range(self.n)}
        for members in self.clusters:
            for v in members:
                out[v] += 1
        return out

    @property
    def max_load(self) -> int:
        return max(self.load().values(), default=0)

    def diam_max(self, topo: Topology) -> int:
        return max((topo.diameter(c) for c in self.clusters), default=0)

    def covers_all(self) -> bool:
        return set().union(*map(set, self.clusters)) == set(range(self.n)) if self.clusters else self.n == 0

    def elect(self, topo: Topology, s: int) -> "GraphCover":
        """Leader of each cluster: the member with the fastest in-cluster CloudWrite (ties to smaller id)."""
        self.leaders, self.timespans = [], []
        for members in self.clusters:
            if sum(topo.bc(v) for v in members) == 0:
                raise ZeroCloudBandwidthEverywhere(f"cluster {members} has no cloud bandwidth")
            best = min((cloud_write_cluster(topo, v, s, members), v) for v in members)
            self.timespans.append(float(best[0]))
            self.leaders.append(best[1])
        return self


def _dedupe(clusters: Iterable[Iterable[int]]) -> list[frozenset[int]]:
    seen: dict[frozenset[int], None] = {}
    for c in clusters:
        fs = frozenset(c)
        if not fs:
            raise InvalidInput("empty cluster")
        seen.setdefault(fs, None)
    return sorted(seen, key=lambda c: (min(c), sorted(c)))


def sparse_cover(clusters: Iterable[Iterable[int]], kappa: int, n: int | None = None) -> GraphCover:
    """Coarsen a cover into one of low load by merging chains of intersecting clusters.

    Each phase repeatedly seeds at the first unprocessed cluster and absorbs
    every remaining cluster that meets the current union, until the union
    stops growing by more than a factor |R|^(1/kappa).  Absorbed clusters are
    finished; clusters touching the union are deferred to a later phase.
    """
    if not isinstance(kappa, int) or kappa < 1:
        raise InvalidKappa(f"kappa must be a positive integer, got {kappa!r}")
    remaining = _dedupe(clusters)
    if n is None:
        n = 1 + max((max(c) for c in remaining), default=-1)
    out: list[frozenset[int]] = []
    while remaining:
        factor = len(remaining) ** (1.0 / kappa)
        unprocessed = list(remaining)
        finished: set[frozenset[int]] = set()
        while unprocessed:
            grown = [unprocessed[0]]
            while True:
                kernel = grown
                union = frozenset().union(*kernel)
                grown = [c for c in unprocessed if c & union]
                if len(grown) <= factor * len(kernel):
                    break
            taken = set(grown)
            unprocessed = [c for c in unprocessed if c not in taken]
            finished.update(kernel)
            if union not in out:
                out.append(union)
        remaining = [c for c in remaining if c not in finished]
    return GraphCover(n, [tuple(sorted(c)) for c in out])


def all_cluster_cover(topo: Topology, s: int) -> GraphCover:
    return GraphCover(topo.n, [tuple(sorted(c)) for c in _dedupe(c.nodes for c in all_cloud_clusters(topo, s))])


def default_kappa(n: int) -> int:
    return max(1, clog2(n))


def build_cover(topo: Topology, s: int, mode: str = "sparse", kappa: int | None = None) -> GraphCover:
    if mode == "all":
        cover = all_cluster_cover(topo, s)
    elif mode == "sparse":
        k = default_kappa(topo.n) if kappa is None else kappa
        cover = sparse_cover((c.nodes for c in all_cloud_clusters(topo, s)), k, topo.n)
    else:
        raise InvalidInput(f"cover mode must be sparse or all, not {mode!r}")
    return cover.elect(topo, s)


# -- combining -------------------------------------------------------------------

class _Fresh:
    def __init__(self) -> None:
        self.k = 0

    def __call__(self, tag: str) -> str:
        self.k += 1
        return f"~{tag}#{self.k}"


def _convergecast(router: Router, op: CombineOp, tree: Tree, inputs: dict[int, str], t0: int,
                  fresh: _Fresh, prio, done) -> None:
    """Each node folds its children's partials with its own input (or the unit) and sends one
    s-bit partial to its parent; ``done(payload, t)`` fires at the root."""
    s = op.size
    children = tree.children()
    got: dict[int, list[tuple[str, int]]] = {v: [] for v in tree.order}

    def ready(v: int) -> None:
        parts = got[v]
        t = max([t0 - 1] + [tt for _, tt in parts])
        names = [name for name, _ in sorted(parts)]
        own = inputs.get(v)
        if own is not None:
            names = [own] + names
        if not names:
            out = fresh("unit")
            router.compute(t, v, out, [], s, lambda: op.unit, "unit")
        elif len(names) == 1:
            out = names[0]
        else:
            out = fresh(f"cc{v}")
            router.compute(t, v, out, names, s, lambda *xs: op.fold(xs), "convergecast")
        if v == tree.root:
            done(out, t)
            return
        p = tree.parent[v]
        c = Counter(s, lambda tt, v=v, out=out: arrive(p, out, tt), t)
        router.push(Piece(out, 0, s), [("S", v, p, tree.link[v])], t + 1, prio,
                    lambda tt, pc: c.add(tt, pc.bits))

    def arrive(v: int, name: str, t: int) -> None:
        got[v].append((name, t))
        if len(got[v]) == len(children[v]):
            ready(v)

    for v in tree.order:
        if not children[v]:
            ready(v)


def convergecast_cluster(topo: Topology, members: Sequence[int], op: CombineOp, inputs: dict[int, int],
                         root: int | None = None, home: Iterable[int] | None = None, detail: bool = False):
    """Fold the inputs of ``home`` nodes (default: all members) to ``root`` over a BFS tree.

    Returns (value, rounds), or a :class:`Measured` record holding the schedule when ``detail`` is set.
    """
    if not op.commutative:
        raise OperatorNotCommutative(f"{op.name} is not commutative")
    members = list(members)
    root = members[0] if root is None else root
    homes = set(members if home is None else home)
    router = Router(topo)
    init = InitialState()
    names = {}
    for v in members:
        if v in homes:
            names[v] = f"S{v}"
            init.add_payload(names[v], op.size, inputs.get(v), holder=v)
    out: dict[str, tuple[str, int]] = {}
    tree = _cluster_tree(topo, root, members)
    _convergecast(router, op, tree, names, 1, _Fresh(), 0, lambda v, t: out.setdefault("r", (v, t)))
    router.run()
    sched = router.builder.build()
    trace = run_schedule(topo, sched, init)
    name, _ = out["r"]
    assert trace.holds(root, name)
    if detail:
        return Measured(trace.payload_value(name), trace.rounds_elapsed, trace, {"schedule": sched, "tree": tree})
    return trace.payload_value(name), trace.rounds_elapsed


def _leaf_clusters(cover: GraphCover) -> list[tuple[int, list[int]]]:
    """(cluster index, home members) for every cluster that is home to some node."""
    home = cover.home
    out = []
    for c, members in enumerate(cover.clusters):
        mine = [v for v in members if home[v] == c]
        if mine:
            out.append((c, mine))
    return out


def combined_write_fat(topo: Topology, op: CombineOp, inputs: Sequence[int] | None = None,
                       cover_mode: str = "sparse", kappa: int | None = None, variant: str = "tree",
                       file: str = "result", cover: GraphCover | None = None) -> CombineOutcome:
    """Write the product of all inputs (commutative operator) to cloud file ``file``.

    ``variant="flow"`` replaces the per-cluster cloud reads and writes by
    optimal joint writes/reads over the whole graph.
    """
    if not op.commutative:
        raise OperatorNotCommutative(f"{op.name} is not commutative")
    if variant not in ("tree", "flow"):
        raise InvalidInput(f"variant must be tree or flow, not {variant!r}")
    if inputs is not None and len(inputs) != topo.n:
        raise InvalidInput(f"expected {topo.n} inputs, got {len(inputs)}")
    s = op.size
    _check_fat(topo, s)
    cover = cover or build_cover(topo, s, cover_mode, kappa)
    router = Router(topo)
    init = InitialState()
    names = {}
    for v in range(topo.n):
        names[v] = f"S{v}"
        init.add_payload(names[v], s, None if inputs is None else inputs[v], holder=v)
    fresh = _Fresh()
    leaves = _leaf_clusters(cover)
    root = computation_tree(len(leaves))
    inner = internal_nodes(root)
    by_index = sorted(range(len(cover.clusters)))
    for y, c in zip(inner, by_index):
        y.arc = c  # type: ignore[assignment]
    leaf_of = {}
    for node in _bfs(root):
        if node.is_leaf:
            leaf_of[node.leaf] = node
    fname: dict[int, str] = {}
    value: dict[int, str] = {}

    def file_of(node: TreeNode) -> str:
        if node.id not in fname:
            fname[node.id] = file if node is root else f"v{node.id}"
        return fname[node.id]

    def tree_of(c: int) -> Tree:
        return _cluster_tree(topo, cover.leaders[c], cover.clusters[c])

    # low level: convergecast in every cluster, then its leader writes the partial
    t0 = 1
    pending_writes: dict[int, list] = {}
    for k, (c, mine) in enumerate(leaves):
        node = leaf_of[k]

        def folded(v: str, t: int, c=c, node=node) -> None:
            value[node.id] = v
            if variant == "tree":
                w = TreeWriter(router, tree_of(c), file_of(node), s, t0, (c,))
                w.feed(Piece(v, 0, s), 0, t + 1)
            else:
                pending_writes.setdefault(cover.leaders[c], []).append((Piece(v, 0, s), file_of(node), 0))

        _convergecast(router, op, tree_of(c), {v: names[v] for v in mine}, t0, fresh, (c,), folded)
    router.run()
    if variant == "flow":
        _flow_phase_write(router, pending_writes)

    # high level: one tree height at a time
    for h in range(1, root.height + 1):
        batch = [y for y in inner if y.height == h]
        t0 = router.last + 1
        if variant == "tree":
            for y in batch:
                _tree_node_stage(router, op, y, tree_of(y.arc), file_of, value, fresh, t0)  # type: ignore[arg-type]
            router.run()
        else:
            reads: dict[int, list] = {}
            for y in batch:
                left, right = y.children
                reads.setdefault(cover.leaders[y.arc], []).extend(  # type: ignore[index]
                    [(file_of(left), 0, s), (file_of(right), 0, s)])
            T = flow_read(topo, router.builder, reads, router.files, router.last)
            t = router.last + T
            writes: dict[int, list] = {}
            for y in batch:
                left, right = y.children
                h_node = cover.leaders[y.arc]  # type: ignore[index]
                out = fresh(f"y{y.id}")
                router.compute(t, h_node, out, [value[left.id], value[right.id]], s, op.apply, "tree")
                value[y.id] = out
                writes.setdefault(h_node, []).append((Piece(out, 0, s), file_of(y), 0))
            router.last = router.now = t
            _flow_phase_write(router, writes)

    trace = run_schedule(topo, router.builder.build(), init)
    val = trace.file_value(file, s)
    return CombineOutcome(val, trace.rounds_elapsed, trace, {"cover": cover, "tree": root, "leaves": leaves})


def _bfs(root: TreeNode) -> list[TreeNode]:
    out, frontier = [], [root]
    while frontier:
        out.extend(frontier)
        frontier = [c for node in frontier for c in node.children]
    return out


def _flow_phase_write(router: Router, streams: dict[int, list]) -> None:
    if not streams:
        return
    T = flow_write(router.topo, router.builder, streams, router.last, files=router.files)
    router.last = router.now = router.last + T


def _tree_node_stage(router: Router, op: CombineOp, y: TreeNode, tree: Tree, file_of, value: dict,
                     fresh: _Fresh, t0: int) -> None:
    s = op.size
    left, right = y.children
    prio = (y.arc,)
    writer = TreeWriter(router, tree, file_of(y), s, t0, prio)

    def got(t: int) -> None:
        out = fresh(f"y{y.id}")
        router.compute(t, tree.root, out, [value[left.id], value[right.id]], s, op.apply, "tree")
        value[y.id] = out
        writer.feed(Piece(out, 0, s), 0, t + 1)

    tree_read(router, tree, [(file_of(left), 0, s), (file_of(right), 0, s)], t0, prio, on_complete=got)


def _flooder(router: Router, tree: Tree, s: int, prio):
    children = tree.children()

    def spread(v: int, t: int) -> None:
        for w in children[v]:
            cnt = Counter(s, lambda tt, w=w: spread(w, tt), t)
            router.push(Piece("F", 0, s), [("S", v, w, tree.link[w])], t + 1, prio,
                        lambda tt, pc, cnt=cnt: cnt.add(tt, pc.bits))

    return spread


def cloudcast_fat(topo: Topology, s: int, value: int | None = None, cover_mode: str = "sparse",
                  kappa: int | None = None, file: str = "F", cover: GraphCover | None = None) -> CombineOutcome:
    """Every cluster leader reads the file, then floods it down its cluster's BFS tree."""
    if s <= 0:
        raise InvalidInput("file size must be positive")
    _check_fat(topo, s)
    cover = cover or build_cover(topo, s, cover_mode, kappa)
    router = Router(topo)
    init = InitialState()
    init.add_payload("F", s, value)
    init.cloud[file] = "F"
    cf = CloudFile()
    cf.put(0, Piece("F", 0, s))
    router.files[file] = cf
    for c, members in enumerate(cover.clusters):
        tree = _cluster_tree(topo, cover.leaders[c], members)
        spread = _flooder(router, tree, s, (c,))
        tree_read(router, tree, [(file, 0, s)], 1, (c,),
                  on_complete=lambda t, tree=tree, spread=spread: spread(tree.root, t))
    router.run()
    trace = run_schedule(topo, router.builder.build(), init)
    missing = [v for v in range(topo.n) if not trace.holds(v, "F")]
    if missing:
        raise FileMissing(f"nodes {missing[:5]} never received the file")
    return CombineOutcome(value, trace.rounds_elapsed, trace, {"cover": cover})
