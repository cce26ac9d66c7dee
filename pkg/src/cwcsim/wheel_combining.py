"""Cover-based combining and dissemination on wheels.

Pipeline for CloudCombinedWrite: build the clockwise cloud intervals, take a
minimum ring cover, 3-colour it, combine inside every cover interval (low
level), then walk a binary computation tree whose internal nodes are run by
cover intervals through cloud files (high level).  Intervals of one colour run
in parallel; colours and tree levels run one after the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .engine import CloudFile, InitialState, RunTrace, run_schedule
from .errors import FileMissing, GrainTooWide, InvalidInput
from .operators import CombineOp
from .ringcover import Arc, RingCover, cover_from_intervals
from .router import Counter, Router, Tree, TreeWriter, path_tree, tree_read
from .schedule import Piece
from .topology import Topology
from .wheel import compute_cloud_interval, wheel_lower_bound


def clog2(x: int) -> int:
    return 0 if x <= 1 else math.ceil(math.log2(x))


@dataclass
class ZMax:
    size_max: int
    phi_min: float
    bc_min: int
    value: float

    def term(self, s: int, x: float) -> float:
        return 0.0 if x == math.inf or s == 0 else s / x


def wheel_zmax(topo: Topology, s: int) -> ZMax:
    ivs = [compute_cloud_interval(topo, i, s, "cw") for i in range(topo.n)]
    size_max = max(iv.size for iv in ivs)
    phi_min = min(iv.phi for iv in ivs)
    bc_min = min(iv.bc_total for iv in ivs)
    z = size_max + (0 if phi_min == math.inf else s / phi_min) + s / bc_min
    return ZMax(size_max, phi_min, bc_min, z)


def max_node_lower_bound(topo: Topology, s: int) -> int:
    return max(wheel_lower_bound(topo, i, s, "both") for i in range(topo.n))


def ring_cover(topo: Topology, s: int) -> RingCover:
    ivs = [compute_cloud_interval(topo, i, s, "cw") for i in range(topo.n)]
    return cover_from_intervals(ivs, topo.n)


# -- computation tree ---------------------------------------------------------

@dataclass
class TreeNode:
    id: int = -1
    children: list["TreeNode"] = field(default_factory=list)
    leaf: int | None = None         # leaf position (0-based, left to right)
    arc: Arc | None = None          # interval running this internal node
    height: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None


def computation_tree(m: int) -> TreeNode:
    """Complete binary tree on 2^ceil(log m) leaves, extra rightmost leaves removed,
    single-child parents folded into their child."""
    if m < 1:
        raise InvalidInput("need at least one leaf")
    p = 1 << clog2(m)

    def build(lo: int, size: int) -> TreeNode | None:
        if size == 1:
            return TreeNode(leaf=lo) if lo < m else None
        half = size // 2
        kids = [c for c in (build(lo, half), build(lo + half, half)) if c is not None]
        if not kids:
            return None
        if len(kids) == 1:
            return kids[0]
        node = TreeNode(children=kids)
        node.height = 1 + max(c.height for c in kids)
        return node

    root = build(0, p)
    assert root is not None
    for k, node in enumerate(bfs_nodes(root)):
        node.id = k
    return root


def bfs_nodes(root: TreeNode) -> list[TreeNode]:
    out, frontier = [], [root]
    while frontier:
        out.extend(frontier)
        frontier = [c for node in frontier for c in node.children]
    return out


def internal_nodes(root: TreeNode) -> list[TreeNode]:
    return [v for v in bfs_nodes(root) if not v.is_leaf]


# -- leaves of the high level ------------------------------------------------

@dataclass
class Leaf:
    arc: Arc
    home: list[int]     # contributing nodes, in combining order


def plan_leaves(cover: RingCover, n: int, commutative: bool) -> list[Leaf]:
    """One leaf per cover interval (its home nodes), in ring order starting at node 0.

    For order-sensitive operators an interval whose home nodes wrap past node
    n-1 is split in two leaves run by the same interval: the part ending at
    n-1 becomes the last leaf and the part starting at 0 the first one.
    """
    leaves: list[tuple[int, Leaf]] = []
    for arc in cover.arcs:
        home = cover.home_nodes(arc)
        if not home:
            continue
        wraps = any(home[j] > home[j + 1] for j in range(len(home) - 1))
        if wraps and not commutative:
            cut = next(j for j in range(len(home) - 1) if home[j] > home[j + 1]) + 1
            leaves.append((home[0], Leaf(arc, home[:cut])))
            leaves.append((home[cut], Leaf(arc, home[cut:])))
        else:
            key = -1 if wraps else home[0]
            leaves.append((key, Leaf(arc, home)))
    leaves.sort(key=lambda kv: kv[0])
    return [lf for _, lf in leaves]


# -- per-interval helpers ------------------------------------------------------

def _members(arc: Arc) -> list[int]:
    return arc.nodes


def _rightward(members: Sequence[int], a: int, b: int) -> list[tuple]:
    """Send steps from members[a] to members[b] (a < b) along the ring."""
    return [("S", members[j], members[j + 1], members[j]) for j in range(a, b)]


def leader_tree(arc: Arc) -> Tree:
    """Path rooted at the rightmost member, walking counterclockwise."""
    mem = _members(arc)
    nodes = mem[::-1]
    links = [nodes[j + 1] for j in range(len(nodes) - 1)]  # link v joins v and v+1
    return path_tree(nodes, links)


class _Names:
    def __init__(self, prefix: str) -> None:
        self.prefix = prefix
        self.k = 0

    def __call__(self, tag: str) -> str:
        self.k += 1
        return f"{self.prefix}{tag}#{self.k}"


@dataclass
class Ctx:
    topo: Topology
    op: CombineOp
    router: Router
    inputs: dict[int, str]        # node -> payload name of its operand
    name: _Names
    grain_inputs: dict[tuple[int, int], str] = field(default_factory=dict)

    @property
    def s(self) -> int:
        return self.op.size


def holistic_fold(ctx: Ctx, arc: Arc, home: Sequence[int], t0: int,
                  done: Callable[[str | None, int], None]) -> None:
    """Binary-tree combining inside ``arc``; result lands at the rightmost member.

    Leaves are padded to a power of two with unit leaves emulated by the leftmost
    member.  Unit values are known structurally and never transmitted.
    """
    mem = _members(arc)
    L = len(mem)
    p = 1 << clog2(L)
    pad = p - L
    homes = set(home)
    router, op, s = ctx.router, ctx.op, ctx.s

    def idx(q: int) -> int:
        return max(0, q - pad)

    def leaf_value(q: int) -> str | None:
        if q < pad:
            return None
        v = mem[q - pad]
        return ctx.inputs[v] if v in homes else None

    def sub(lo: int, size: int, cb: Callable[[str | None, int], None]) -> None:
        if size == 1:
            cb(leaf_value(lo), t0 - 1)
            return
        half = size // 2
        src, dst = idx(lo + half - 1), idx(lo + size - 1)
        state: dict[str, tuple[str | None, int]] = {}

        def combine() -> None:
            if "L" not in state or "R" not in state:
                return
            (lv, lt), (rv, rt) = state["L"], state["R"]
            if lv is None:
                cb(rv, rt)
            elif rv is None:
                cb(lv, lt)
            else:
                t = max(lt, rt)
                out = ctx.name("p")
                router.compute(t, mem[dst], out, [lv, rv], s, op.apply, "fold")
                cb(out, t)

        def left(v: str | None, t: int) -> None:
            if v is None:
                state["L"] = (None, t0 - 1)
                combine()
            elif src == dst:
                state["L"] = (v, t)
                combine()
            else:
                def arrived(tt: int) -> None:
                    state["L"] = (v, tt)
                    combine()
                c = Counter(s, arrived, t)
                router.push(Piece(v, 0, s), _rightward(mem, src, dst), t + 1, 0,
                            lambda tt, pc: c.add(tt, pc.bits))

        def right(v: str | None, t: int) -> None:
            state["R"] = (v, t0 - 1 if v is None else t)
            combine()

        sub(lo, half, left)
        sub(lo + half, half, right)

    sub(0, p, done)


def _grain_input(ctx: Ctx, node: int, j: int, t: int) -> str:
    key = (node, j)
    if key not in ctx.grain_inputs:
        off, w = ctx.op.grain_layout()[j]
        name = ctx.name(f"in{node}g{j}")
        src = ctx.inputs[node]
        ctx.router.compute(t, node, name, [src], w, lambda x, off=off, w=w: (x >> off) & ((1 << w) - 1), "grain")
        ctx.grain_inputs[key] = name
    return ctx.grain_inputs[key]


def chain_fold(ctx: Ctx, arc: Arc, home: Sequence[int], t0: int,
               grain_done: Callable[[int, str | None, int], None]) -> None:
    """One-pass grain-pipelined fold from the leftmost to the rightmost member.

    ``grain_done(j, payload, t)`` fires when grain j of the interval product is
    held by the rightmost member at the end of round t (payload None = unit).
    """
    mem = _members(arc)
    L = len(mem)
    homes = set(home)
    layout = ctx.op.grain_layout()
    router, op = ctx.router, ctx.op

    def at(j: int, g: int, val: str | None, t: int) -> None:
        node = mem[j]
        own = _grain_input(ctx, node, g, t0 - 1) if node in homes else None
        if val is None:
            res, tr = own, t0 - 1
        elif own is None:
            res, tr = val, t
        else:
            res, tr = ctx.name(f"c{node}g{g}"), t
            router.compute(t, node, res, [val, own], layout[g][1],
                           lambda a, b, g=g: op.apply_grain(g, a, b), "grain-fold")
        if j == L - 1:
            grain_done(g, res, tr)
            return
        if res is None:
            at(j + 1, g, None, t0 - 1)
            return
        w = layout[g][1]
        c = Counter(w, lambda tt: at(j + 1, g, res, tt), tr)
        router.push(Piece(res, 0, w), _rightward(mem, j, j + 1), tr + 1, 0, lambda tt, pc: c.add(tt, pc.bits))

    for g in range(len(layout)):
        at(0, g, None, t0 - 1)


def _unit_payload(ctx: Ctx, node: int, t: int, g: int | None = None) -> str:
    if g is None:
        name = ctx.name("unit")
        ctx.router.compute(t, node, name, [], ctx.s, lambda: ctx.op.unit, "unit")
        return name
    off, w = ctx.op.grain_layout()[g]
    name = ctx.name(f"unitg{g}")
    ctx.router.compute(t, node, name, [], w, lambda: ctx.op.grain_bits(ctx.op.unit, g), "unit")
    return name


# -- the full pipeline ---------------------------------------------------------

@dataclass
class CombineOutcome:
    value: int | None
    rounds: int
    trace: RunTrace
    info: dict


def _setup(topo: Topology, op: CombineOp, inputs: Sequence[int] | None, prefix: str = ""):
    if topo.mode != "wheel":
        raise InvalidInput("wheel combining needs a wheel topology")
    if inputs is not None and len(inputs) != topo.n:
        raise InvalidInput(f"expected {topo.n} inputs, got {len(inputs)}")
    router = Router(topo)
    init = InitialState()
    names = {}
    for v in range(topo.n):
        name = f"{prefix}S{v}"
        init.add_payload(name, op.size, None if inputs is None else inputs[v], holder=v)
        names[v] = name
    return router, init, Ctx(topo, op, router, names, _Names(prefix + "~"))


def _run_levels(ctx: Ctx, cover: RingCover, leaves: list[Leaf], root: TreeNode,
                leaf_stage, node_stage) -> None:
    """Low level colour by colour, then every tree height colour by colour."""
    router = ctx.router
    t0 = router.last + 1
    for color in (1, 2, 3):
        batch = [k for k, lf in enumerate(leaves) if cover.coloring[lf.arc.index] == color]
        if not batch:
            continue
        for k in batch:
            leaf_stage(k, t0)
        router.run()
        t0 = router.last + 1
    inner = internal_nodes(root)
    for h in range(1, root.height + 1):
        for color in (1, 2, 3):
            batch = [y for y in inner if y.height == h and cover.coloring[y.arc.index] == color]
            if not batch:
                continue
            for y in batch:
                node_stage(y, t0)
            router.run()
            t0 = router.last + 1


def _assign(cover: RingCover, root: TreeNode) -> None:
    arcs = sorted(cover.arcs, key=lambda a: a.index)
    for y, arc in zip(internal_nodes(root), arcs):
        y.arc = arc


def _leaf_nodes(root: TreeNode) -> dict[int, TreeNode]:
    return {v.leaf: v for v in bfs_nodes(root) if v.is_leaf}


def combined_write_wheel(topo: Topology, op: CombineOp, inputs: Sequence[int] | None = None,
                         file: str = "result") -> CombineOutcome:
    """Write the ordered product of all node inputs to cloud file ``file``."""
    s = op.size
    router, init, ctx = _setup(topo, op, inputs)
    cover = ring_cover(topo, s)
    leaves = plan_leaves(cover, topo.n, op.commutative)
    root = computation_tree(len(leaves))
    _assign(cover, root)
    by_leaf = _leaf_nodes(root)
    fname = {}
    value = {}

    def file_of(node: TreeNode) -> str:
        if node.id not in fname:
            fname[node.id] = file if node is root else f"v{node.id}"
        return fname[node.id]

    def leaf_stage(k: int, t0: int) -> None:
        lf = leaves[k]
        node = by_leaf[k]
        h = lf.arc.last

        def folded(v: str | None, t: int) -> None:
            if v is None:
                v = _unit_payload(ctx, h, t)
            value[node.id] = v
            w = TreeWriter(router, leader_tree(lf.arc), file_of(node), s, t0)
            w.feed(Piece(v, 0, s), 0, t + 1)

        holistic_fold(ctx, lf.arc, lf.home, t0, folded)

    def node_stage(y: TreeNode, t0: int) -> None:
        arc = y.arc
        h = arc.last
        lt = leader_tree(arc)
        left, right = y.children
        writer = TreeWriter(router, lt, file_of(y), s, t0)

        def got(t: int) -> None:
            out = ctx.name("y")
            router.compute(t, h, out, [value[left.id], value[right.id]], s, op.apply, "tree")
            value[y.id] = out
            writer.feed(Piece(out, 0, s), 0, t + 1)

        tree_read(router, lt, [(file_of(left), 0, s), (file_of(right), 0, s)], t0, on_complete=got)

    _run_levels(ctx, cover, leaves, root, leaf_stage, node_stage)
    trace = run_schedule(topo, router.builder.build(), init)
    val = trace.file_value(file, s)
    return CombineOutcome(val, trace.rounds_elapsed, trace,
                          {"cover": cover, "leaves": leaves, "tree": root})


def combined_write_modular(topo: Topology, op: CombineOp, inputs: Sequence[int] | None = None,
                           strict: bool = False, file: str = "result") -> CombineOutcome:
    """Grain-pipelined variant: products move grain by grain at both levels.

    An operator without a grain partition is handled as a single grain.  In
    strict mode every link used inside a cover interval must carry a full grain
    per round.
    """
    s = op.size
    layout = op.grain_layout()
    router, init, ctx = _setup(topo, op, inputs)
    cover = ring_cover(topo, s)
    if strict:
        g = op.grain_size
        for arc in cover.arcs:
            mem = _members(arc)
            for v in mem[:-1]:
                if topo.links[v].w < g:
                    raise GrainTooWide(f"grain {g} exceeds link ({v}, {(v + 1) % topo.n}) bandwidth")
    leaves = plan_leaves(cover, topo.n, op.commutative)
    root = computation_tree(len(leaves))
    _assign(cover, root)
    by_leaf = _leaf_nodes(root)
    fname: dict[int, str] = {}
    grains: dict[int, list[str]] = {}

    def file_of(node: TreeNode) -> str:
        if node.id not in fname:
            fname[node.id] = file if node is root else f"v{node.id}"
        return fname[node.id]

    def leaf_stage(k: int, t0: int) -> None:
        lf = leaves[k]
        node = by_leaf[k]
        h = lf.arc.last
        writer = TreeWriter(router, leader_tree(lf.arc), file_of(node), s, t0)
        slots: list[str | None] = [None] * len(layout)
        grains[node.id] = slots  # type: ignore[assignment]

        def grain_done(g: int, v: str | None, t: int) -> None:
            if v is None:
                v = _unit_payload(ctx, h, max(t, t0 - 1), g)
            slots[g] = v
            off, w = layout[g]
            writer.feed(Piece(v, 0, w), off, t + 1)

        chain_fold(ctx, lf.arc, lf.home, t0, grain_done)

    def node_stage(y: TreeNode, t0: int) -> None:
        arc = y.arc
        h = arc.last
        lt = leader_tree(arc)
        left, right = y.children
        writer = TreeWriter(router, lt, file_of(y), s, t0)
        slots: list[str | None] = [None] * len(layout)
        grains[y.id] = slots  # type: ignore[assignment]
        owner: dict[str, tuple[int, int]] = {}
        for g in range(len(layout)):
            owner[grains[left.id][g]] = (g, 0)
            owner[grains[right.id][g]] = (g, 1)
        have = [[False, False] for _ in layout]

        def both(g: int, t: int) -> None:
            off, w = layout[g]
            out = ctx.name(f"y{y.id}g{g}")
            router.compute(t, h, out, [grains[left.id][g], grains[right.id][g]], w,
                           lambda a, b, g=g: op.apply_grain(g, a, b), "tree-grain")
            slots[g] = out
            writer.feed(Piece(out, 0, w), off, t + 1)

        def side_done(g: int, side: int, t: int) -> None:
            have[g][side] = True
            latest[g] = max(latest[g], t)
            if all(have[g]):
                both(g, latest[g])

        latest = [t0 - 1] * len(layout)
        counters = {name: Counter(layout[g][1], lambda t, g=g, sd=sd: side_done(g, sd, t), t0 - 1)
                    for name, (g, sd) in owner.items()}

        def on_piece(t: int, pc: Piece | None) -> None:
            counters[pc.payload].add(t, pc.bits)

        segs = []
        for off, w in layout:
            segs.append((file_of(left), off, off + w))
            segs.append((file_of(right), off, off + w))
        tree_read(router, lt, segs, t0, on_piece=on_piece)

    _run_levels(ctx, cover, leaves, root, leaf_stage, node_stage)
    trace = run_schedule(topo, router.builder.build(), init)
    val = trace.file_value(file, s)
    return CombineOutcome(val, trace.rounds_elapsed, trace,
                          {"cover": cover, "leaves": leaves, "tree": root})


def combine_within_interval(topo: Topology, arc: Arc, op: CombineOp, inputs: dict[int, int],
                            home: Sequence[int] | None = None) -> tuple[int | None, int]:
    """Run only the in-interval combining tree; returns (product at the rightmost member, rounds)."""
    router = Router(topo)
    init = InitialState()
    names = {}
    for v in arc.nodes:
        names[v] = f"S{v}"
        init.add_payload(names[v], op.size, inputs.get(v), holder=v)
    ctx = Ctx(topo, op, router, names, _Names("~"))
    out: dict[str, tuple[str | None, int]] = {}
    holistic_fold(ctx, arc, list(arc.nodes) if home is None else list(home), 1,
                  lambda v, t: out.setdefault("r", (v, t)))
    router.run()
    trace = run_schedule(topo, router.builder.build(), init)
    v, _ = out["r"]
    if v is None:
        return op.unit, trace.rounds_elapsed
    assert trace.holds(arc.last, v)
    return trace.payload_value(v), trace.rounds_elapsed


def cloudcast_wheel(topo: Topology, s: int, value: int | None = None, file: str = "F") -> CombineOutcome:
    """Every cover interval's leader reads the file, then forwards it to the rest of its interval."""
    if s <= 0:
        raise InvalidInput("file size must be positive")
    router = Router(topo)
    init = InitialState()
    init.add_payload("F", s, value)
    init.cloud[file] = "F"
    cf = CloudFile()
    cf.put(0, Piece("F", 0, s))
    router.files[file] = cf
    cover = ring_cover(topo, s)
    for arc in cover.arcs:
        mem = _members(arc)
        lt = leader_tree(arc)

        def spread(t: int, mem=mem) -> None:
            if len(mem) > 1:
                steps = [("S", mem[j], mem[j - 1], mem[j - 1]) for j in range(len(mem) - 1, 0, -1)]
                router.push(Piece("F", 0, s), steps, t + 1)

        tree_read(router, lt, [(file, 0, s)], 1, on_complete=spread)
    router.run()
    trace = run_schedule(topo, router.builder.build(), init)
    missing = [v for v in range(topo.n) if not trace.holds(v, "F")]
    if missing:
        raise FileMissing(f"nodes {missing[:5]} never received the file")
    return CombineOutcome(value, trace.rounds_elapsed, trace, {"cover": cover})
