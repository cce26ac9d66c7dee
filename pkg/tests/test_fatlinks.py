import math
import random
from collections import Counter

import pytest

from cwcsim.errors import FatLinkTooThin, InvalidKappa, OperatorNotCommutative
from cwcsim.fatlinks import (_leaf_clusters, all_cloud_clusters, all_cluster_cover, build_cover, cloud_read_cluster,
                             cloud_write_cluster, cloudcast_fat, cluster_lower_bound, combined_write_fat,
                             compute_cloud_cluster, convergecast_cluster, default_kappa, graph_zmax, sparse_cover)
from cwcsim.generators import random_fat_graph, random_graph, ring_of_cliques
from cwcsim.generic import combined_write_generic
from cwcsim.measure import log_factor
from cwcsim.operators import add_op, compose8_op, matmul2_op, xor_op
from cwcsim.schedule import Send
from cwcsim.topology import graph

from oracles import bfs_dist, fold


def _path(n, bc, s):
    return graph(n, [[i, i + 1, s] for i in range(n - 1)], bc, mode="fat", s=s)


def _star(leaves, bc, s):
    return graph(leaves + 1, [[0, j, s] for j in range(1, leaves + 1)], bc, mode="fat", s=s)


def _edges(topo):
    return [(ln.u, ln.v) for ln in topo.links]


# -- clusters ---------------------------------------------------------------------------

def test_cluster_of_strong_node():
    t = _path(4, [20, 1, 1, 1], 20)
    c = compute_cloud_cluster(t, 0, 20)
    assert c.k == 0 and c.nodes == (0,)
    assert math.ceil(c.Z) == 1
    assert cloud_write_cluster(t, 0, 20) == 1


def test_cluster_on_path_of_five():
    t = _path(5, 1, 6)
    assert compute_cloud_cluster(t, 0, 6).k == 2
    assert compute_cloud_cluster(t, 2, 6).k == 1


def test_cluster_radius_against_ball_scan():
    for seed in range(15):
        t = random_fat_graph(seed, 12, 8)
        edges = _edges(t)
        for s in (1, 8, 40):
            for i in range(t.n):
                c = compute_cloud_cluster(t, i, s)
                dist = bfs_dist(t.n, edges, i)
                diam = max(max(bfs_dist(t.n, edges, v).values()) for v in range(t.n))

                def ok(r):
                    return (r + 1) * sum(t.bc(v) for v in dist if dist[v] <= r) >= s

                want = next((r for r in range(diam + 1) if ok(r)), diam)
                assert c.k == want
                assert set(c.nodes) == {v for v in dist if dist[v] <= want}


def test_star_centre_reaches_all_leaves():
    t = _star(4, 1, 10)
    c = compute_cloud_cluster(t, 0, 10)
    assert c.k == 1 and set(c.nodes) == set(range(5))


def test_fat_links_checked():
    t = graph(3, [[0, 1, 4], [1, 2, 4]], 1)
    with pytest.raises(FatLinkTooThin):
        combined_write_fat(t, xor_op(8), [0, 0, 0])


@pytest.mark.parametrize("seed", range(6))
def test_cluster_write_bounds_and_reversal(seed):
    t = random_fat_graph(seed, 14, 16)
    for i in range(t.n):
        c = compute_cloud_cluster(t, i, 16)
        v = random.Random(i).getrandbits(16)
        m = cloud_write_cluster(t, i, 16, value=v, detail=True)
        assert m.value == v
        assert m.rounds >= max(c.k, math.ceil(16 / c.bc_total))
        assert cluster_lower_bound(t, i, 16) <= m.rounds <= 8 * c.Z
        r = cloud_read_cluster(t, i, 16, value=v, detail=True)
        assert r.value == v and r.rounds == m.rounds


# -- covers ------------------------------------------------------------------------------

def _cover_properties(topo, clusters, cover, kappa):
    for c in clusters:
        assert any(set(c) <= set(d) for d in cover.clusters)
    assert cover.covers_all()
    diam_in = max(topo.diameter(c) for c in clusters)
    assert cover.diam_max(topo) <= 4 * kappa * diam_in
    m = len({frozenset(c) for c in clusters})
    assert cover.max_load <= 2 * kappa * m ** (1 / kappa)


def test_kappa_one_keeps_guarantees():
    t = ring_of_cliques(4, 4, 8)
    clusters = [c.nodes for c in all_cloud_clusters(t, 8)]
    _cover_properties(t, clusters, sparse_cover(clusters, 1, t.n), 1)


def test_ring_of_cliques_kappa_four():
    t = ring_of_cliques(4, 4, 32)
    clusters = [c.nodes for c in all_cloud_clusters(t, 32)]
    _cover_properties(t, clusters, sparse_cover(clusters, 4, t.n), 4)


@pytest.mark.parametrize("seed", range(10))
def test_default_kappa_load(seed):
    t = random_fat_graph(seed, 24, 32, bc_range=(0, 2))
    clusters = [c.nodes for c in all_cloud_clusters(t, 32)]
    kappa = default_kappa(t.n)
    cover = sparse_cover(clusters, kappa, t.n)
    _cover_properties(t, clusters, cover, kappa)
    assert cover.max_load <= 4 * math.ceil(math.log2(t.n))


def test_invalid_kappa():
    with pytest.raises(InvalidKappa):
        sparse_cover([[0, 1]], 0)


@pytest.mark.parametrize("seed", range(4))
def test_leaders_minimise_in_cluster_write(seed):
    t = random_fat_graph(seed, 12, 8)
    cover = build_cover(t, 8, "all")
    for c, members in enumerate(cover.clusters):
        times = {v: cloud_write_cluster(t, v, 8, members) for v in members}
        best = min(times.values())
        assert times[cover.leaders[c]] == best
        assert cover.leaders[c] == min(v for v in members if times[v] == best)


def test_homes_partition_nodes():
    for seed in range(5):
        t = random_fat_graph(seed, 20, 8)
        for mode in ("all", "sparse"):
            cover = build_cover(t, 8, mode)
            homes = [v for _, mine in _leaf_clusters(cover) for v in mine]
            assert sorted(homes) == list(range(t.n))


# -- convergecast ---------------------------------------------------------------------------

def test_convergecast_single_node():
    t = _path(2, 1, 8)
    assert convergecast_cluster(t, [1], xor_op(8), {1: 77}) == (77, 0)


def test_convergecast_star():
    t = _star(4, 1, 16)
    op = add_op(16)
    xs = {v: random.Random(v).getrandbits(16) for v in range(5)}
    value, rounds = convergecast_cluster(t, list(range(5)), op, xs, root=0)
    assert value == fold("add", list(xs.values()))
    assert rounds <= 3


@pytest.mark.parametrize("seed", range(8))
def test_convergecast_height_and_one_partial_per_edge(seed):
    t = random_fat_graph(seed, 15, 16)
    op = xor_op(16)
    xs = {v: random.Random(seed * 31 + v).getrandbits(16) for v in range(t.n)}
    m = convergecast_cluster(t, list(range(t.n)), op, xs, root=seed % t.n, detail=True)
    assert m.value == fold("xor", list(xs.values()))
    tree = m.info["tree"]
    height = max(tree.depth.values())
    assert m.rounds <= 2 * height + 1
    per_edge = Counter()
    for _, a in m.info["schedule"].actions():
        if isinstance(a, Send):
            per_edge[(a.src, a.dst)] += sum(p.bits for p in a.pieces)
    assert per_edge == Counter({(v, tree.parent[v]): 16 for v in tree.order[1:]})


def test_convergecast_rejects_noncommutative():
    with pytest.raises(OperatorNotCommutative):
        convergecast_cluster(_path(3, 1, 4), [0, 1, 2], matmul2_op(), {})


# -- combined write and cloudcast ---------------------------------------------------------------

def test_fat_unit_inputs():
    t = random_fat_graph(2, 10, 16)
    for op in (xor_op(16), add_op(16)):
        assert combined_write_fat(t, op, [op.unit] * 10).value == op.unit


@pytest.mark.parametrize("seed", range(5))
def test_fat_sixteen_nodes_xor(seed):
    t = random_fat_graph(seed, 16, 16)
    rng = random.Random(seed)
    xs = [rng.getrandbits(16) for _ in range(16)]
    zmax = graph_zmax(t, 16)
    for mode in ("sparse", "all"):
        out = combined_write_fat(t, xor_op(16), xs, mode)
        assert out.value == fold("xor", xs)
        assert zmax <= out.rounds <= 32 * zmax * log_factor(16) ** 2


@pytest.mark.parametrize("seed", range(5))
def test_flow_variant_never_slower(seed):
    t = random_fat_graph(seed, 16, 16)
    rng = random.Random(seed)
    xs = [rng.getrandbits(16) for _ in range(16)]
    tree = combined_write_fat(t, add_op(16), xs, variant="tree")
    flow = combined_write_fat(t, add_op(16), xs, variant="flow")
    assert tree.value == flow.value == fold("add", xs)
    assert flow.rounds <= tree.rounds


def test_fat_rejects_noncommutative():
    t = random_fat_graph(1, 6, 24)
    for op in (matmul2_op(), compose8_op()):
        with pytest.raises(OperatorNotCommutative):
            combined_write_fat(t, op)


def test_cloudcast_fat_singleton():
    t = graph(1, [], [4], mode="fat", s=8)
    assert cloudcast_fat(t, 8).rounds == 2


@pytest.mark.parametrize("seed", range(5))
def test_cloudcast_fat_sandwich_and_content(seed):
    t = random_fat_graph(seed, 20, 16)
    out = cloudcast_fat(t, 16, value=4242)
    assert all(out.trace.holds(v, "F") and out.trace.payload_value("F") == 4242 for v in range(t.n))
    lower = max(cluster_lower_bound(t, i, 16) for i in range(t.n))
    assert lower <= out.rounds <= 32 * graph_zmax(t, 16) * log_factor(t.n) ** 2


def test_all_cluster_cover_dedupes():
    t = ring_of_cliques(3, 3, 8, cloud_bw=8)
    cover = all_cluster_cover(t, 8)
    assert len(cover.clusters) == len(set(cover.clusters)) == t.n   # each singleton ball


# -- generic combining ----------------------------------------------------------------------------

def test_generic_single_node():
    t = graph(1, [], [2])
    out = combined_write_generic(t, xor_op(8), [9])
    assert out.value == 9
    assert out.info["iterations"] == 0 and len(out.info["horizons"]) == 1
    assert out.rounds == 4


def test_generic_halves_live_values():
    t = random_graph(3, 8)
    out = combined_write_generic(t, matmul2_op(), [random.Random(k).getrandbits(4) for k in range(8)])
    assert [len(h) for h in out.info["history"]] == [8, 4, 2, 1]
    assert out.info["history"][1] == [f"X1_{i}" for i in range(4)]


@pytest.mark.parametrize("name", ["xor", "add", "matmul2", "compose8"])
@pytest.mark.parametrize("seed", range(3))
def test_generic_matches_fold(name, seed):
    rng = random.Random(seed)
    n = rng.randint(2, 12)
    t = random_graph(seed, n)
    op = {"xor": xor_op(16), "add": add_op(16), "matmul2": matmul2_op(), "compose8": compose8_op()}[name]
    xs = [op.random_value(rng) for _ in range(n)]
    if name == "compose8":
        xs = [sum(rng.randrange(8) << (3 * k) for k in range(8)) for _ in range(n)]
    out = combined_write_generic(t, op, xs)
    assert out.value == fold(name, xs, op.size)
    t_s = out.info["T_s"]
    assert out.rounds <= 3 * t_s * math.ceil(math.log2(n)) + t_s
