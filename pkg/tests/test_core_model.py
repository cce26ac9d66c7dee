import random

import pytest
from hypothesis import given, settings, strategies as st

from cwcsim.engine import InitialState, cut_capacity, run_schedule
from cwcsim.errors import (BandwidthExceeded, BrokenRing, CausalityViolation, FatLinkTooThin, InvalidInput,
                           NonIntegerBandwidth, OverlappingCloudWrite, ReadWriteConflict)
from cwcsim.measure import measure
from cwcsim.operators import add_op, compose8_op, make_op, matmul2_op, xor_op
from cwcsim.schedule import Piece, ScheduleBuilder
from cwcsim.topology import build_topology, graph, wheel
from cwcsim.wheel import cloud_write_interval

from oracles import fold


# -- topology ----------------------------------------------------------------------

def test_uniform_wheel_of_eight():
    t = build_topology({"mode": "wheel", "n": 8, "cloud_bw": 1, "local_bw": 4})
    assert t.n == 8
    assert len(t.links) == 8
    assert t.cloud == [1] * 8
    assert {(ln.u, ln.v) for ln in t.links} == {(i, (i + 1) % 8) for i in range(8)}


def test_single_node_wheel_has_no_self_loop():
    t = build_topology({"mode": "wheel", "n": 1, "cloud_bw": [5]})
    assert t.links == []
    assert t.bc(0) == 5


def test_fat_mode_rejects_thin_link():
    with pytest.raises(FatLinkTooThin):
        build_topology({"mode": "fat", "n": 3, "s": 10, "cloud_bw": 1,
                        "edges": [[0, 1, 12], [1, 2, 7]]})


def test_non_integer_bandwidth_rejected():
    with pytest.raises(NonIntegerBandwidth):
        build_topology({"mode": "wheel", "n": 4, "cloud_bw": 1.5, "local_bw": 4})
    with pytest.raises(NonIntegerBandwidth):
        build_topology({"mode": "wheel", "n": 4, "cloud_bw": 1, "local_bw": -2})


def test_wheel_with_missing_ring_edge():
    with pytest.raises(BrokenRing):
        build_topology({"mode": "wheel", "n": 4, "cloud_bw": 1, "edges": [[0, 1, 4], [1, 2, 4], [2, 3, 4]]})


def test_malformed_description():
    with pytest.raises(InvalidInput):
        build_topology({"mode": "wheel", "cloud_bw": 1})
    with pytest.raises(InvalidInput):
        build_topology({"mode": "torus", "n": 2, "cloud_bw": 1, "edges": []})


# -- engine ------------------------------------------------------------------------

def test_empty_schedule():
    t = wheel(4, 1, 4)
    init = InitialState()
    init.add_payload("A", 8, 5, holder=2)
    trace = run_schedule(t, ScheduleBuilder().build(), init)
    assert trace.rounds_elapsed == 0
    assert trace.holds(2, "A") and not trace.holds(1, "A")
    assert trace.cloud.files == {}


def test_one_round_write():
    t = wheel(1, 3, 0)
    init = InitialState()
    init.add_payload("A", 3, 0b101, holder=0)
    b = ScheduleBuilder()
    b.write(1, 0, "f", 0, Piece("A", 0, 3))
    trace = run_schedule(t, b.build(), init)
    assert trace.rounds_elapsed == 1
    assert trace.file_value("f", 3) == 0b101


def test_overlapping_writes_rejected():
    t = wheel(2, 4, 4)
    init = InitialState()
    init.add_payload("A", 4, 1, holder=0)
    init.add_payload("B", 4, 2, holder=1)
    b = ScheduleBuilder()
    b.write(1, 0, "f", 0, Piece("A", 0, 4))
    b.write(1, 1, "f", 0, Piece("B", 0, 4))
    with pytest.raises(OverlappingCloudWrite):
        run_schedule(t, b.build(), init)


def test_bandwidth_exceeded():
    t = wheel(2, 2, 4)
    init = InitialState()
    init.add_payload("A", 3, 0, holder=0)
    b = ScheduleBuilder()
    b.write(1, 0, "f", 0, Piece("A", 0, 3))
    with pytest.raises(BandwidthExceeded):
        run_schedule(t, b.build(), init)
    b = ScheduleBuilder()
    b.send(1, 0, 1, 0, Piece("A", 0, 3))
    b.send(1, 0, 1, 0, Piece("A", 0, 2))
    with pytest.raises(BandwidthExceeded):
        run_schedule(t, b.build(), init)


def test_send_requires_held_bits():
    t = wheel(3, 1, 4)
    init = InitialState()
    init.add_payload("A", 4, 0, holder=0)
    b = ScheduleBuilder()
    b.send(1, 0, 1, 0, Piece("A", 0, 4))
    b.send(1, 1, 2, 1, Piece("A", 0, 4))   # node 1 only holds A from round 2
    with pytest.raises(CausalityViolation):
        run_schedule(t, b.build(), init)
    b = ScheduleBuilder()
    b.send(1, 0, 1, 0, Piece("A", 0, 4))
    b.send(2, 1, 2, 1, Piece("A", 0, 4))
    assert run_schedule(t, b.build(), init).holds(2, "A")


def test_read_and_write_same_file_same_round_rejected():
    t = wheel(2, 4, 4)
    init = InitialState()
    init.add_payload("A", 4, 0, holder=0)
    init.add_payload("B", 4, 0, holder=1)
    b = ScheduleBuilder()
    b.write(1, 0, "f", 0, Piece("A", 0, 2))
    b.write(2, 0, "f", 2, Piece("A", 2, 4))
    b.read(2, 1, "f", 0, 2)
    with pytest.raises(ReadWriteConflict):
        run_schedule(t, b.build(), init)


def test_concurrent_reads_allowed():
    t = wheel(3, 4, 4)
    init = InitialState()
    init.add_payload("A", 4, 9, holder=0)
    b = ScheduleBuilder()
    b.write(1, 0, "f", 0, Piece("A", 0, 4))
    b.read(2, 1, "f", 0, 4)
    b.read(2, 2, "f", 0, 4)
    trace = run_schedule(t, b.build(), init)
    assert trace.holds(1, "A") and trace.holds(2, "A")
    assert trace.rounds_elapsed == 2


def test_cut_capacity():
    t = wheel(4, [1, 2, 3, 4], [5, 6, 7, 8])
    assert cut_capacity(t, [0]) == 1 + 5 + 8
    assert cut_capacity(t, [0, 1], to_cloud=False) == 6 + 8
    assert cut_capacity(t, range(4)) == 10


def test_measured_rounds_respect_cut_bound():
    t = wheel(8, 1, 4)
    s = 64
    rounds = cloud_write_interval(t, 0, s)
    # every bit leaves node 0 over its ring links or its cloud link
    assert rounds >= -(-s // cut_capacity(t, [0]))


def test_determinism():
    t = wheel(8, [1, 2, 1, 3, 1, 1, 2, 1], [4, 3, 8, 2, 5, 4, 4, 6])
    a = measure(t, "combined_write_wheel", {"op": "matmul2"}, seed=11)
    b = measure(t, "combined_write_wheel", {"op": "matmul2"}, seed=11)
    assert (a.output, a.rounds) == (b.output, b.rounds)


# -- operators ---------------------------------------------------------------------

OPS = [xor_op(16), add_op(16), add_op(64, 16), matmul2_op(), compose8_op()]


@pytest.mark.parametrize("op", OPS, ids=lambda o: f"{o.name}{o.size}")
@given(data=st.data())
@settings(max_examples=60, deadline=None)
def test_operator_laws(op, data):
    a, b, c = (data.draw(st.integers(0, (1 << op.size) - 1)) for _ in range(3))
    if op.name == "compose8":
        a, b, c = (sum((v >> (3 * k) & 7) << (3 * k) for k in range(8)) for v in (a, b, c))
    assert op.apply(op.unit, a) == a == op.apply(a, op.unit)
    assert op.apply(op.apply(a, b), c) == op.apply(a, op.apply(b, c))
    lane = 16 if op.name == "add" else op.size
    assert op.fold([a, b, c]) == fold(op.name, [a, b, c], op.size, lane)


@given(st.lists(st.integers(0, (1 << 64) - 1), min_size=2, max_size=2))
@settings(max_examples=80, deadline=None)
def test_modular_grains_concatenate(pair):
    op = add_op(64, 8)
    a, b = pair
    whole = op.apply(a, b)
    for j, (off, w) in enumerate(op.grain_layout()):
        assert op.apply_grain(j, op.grain_bits(a, j), op.grain_bits(b, j)) == (whole >> off) & ((1 << w) - 1)


def test_noncommutative_operators_are_order_sensitive():
    rng = random.Random(3)
    for op in (matmul2_op(), compose8_op()):
        assert not op.commutative
        differs = 0
        for _ in range(50):
            a, b = op.random_value(rng), op.random_value(rng)
            differs += op.apply(a, b) != op.apply(b, a)
        assert differs > 0


def test_make_op_names():
    assert make_op("xor", 8).size == 8
    assert make_op("add").size == 16
    with pytest.raises(InvalidInput):
        make_op("nand")


# -- measure -----------------------------------------------------------------------

def test_measure_write_on_uniform_wheel():
    out, rounds = measure(wheel(8, 1, 4), "cloud_write_interval", {"node": 0, "s": 9}, inputs=0b101101011)
    assert out == 0b101101011
    assert rounds == cloud_write_interval(wheel(8, 1, 4), 0, 9)


def test_measure_xor_of_zero_inputs():
    res = measure(wheel(8, 1, 4), "combined_write_wheel", {"op": "xor", "s": 16}, inputs=[0] * 8)
    assert res.output == 0 and res.passed


def test_measure_cloudcast_fat_reaches_everyone():
    t = graph(4, [[0, 1, 8], [1, 2, 8], [2, 3, 8]], [1, 0, 0, 2], mode="fat", s=8)
    res = measure(t, "cloudcast_fat", {"s": 8}, inputs=77)
    assert res.passed and res.rounds > 0


def test_measure_unknown_algorithm():
    with pytest.raises(InvalidInput):
        measure(wheel(2, 1, 1), "teleport", {})
