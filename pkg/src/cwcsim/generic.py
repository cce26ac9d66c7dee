"""Order-preserving combining on arbitrary graphs through optimal joint cloud transfers.

Live values X_0..X_{m-1} sit at nodes 0..m-1.  Each iteration writes them all
to the cloud in one optimal joint write, then node i reads X_{2i} and X_{2i+1}
in two optimal joint reads and keeps their product, halving m.  Node 0 finally
writes the single remaining value.
"""
from __future__ import annotations

from typing import Sequence

from .engine import CloudFile, InitialState, run_schedule
from .errors import InvalidInput
from .flow import flow_read, flow_write
from .operators import CombineOp
from .schedule import Piece, ScheduleBuilder
from .topology import Topology
from .wheel_combining import CombineOutcome


def combined_write_generic(topo: Topology, op: CombineOp, inputs: Sequence[int] | None = None,
                           file: str = "result") -> CombineOutcome:
    if inputs is not None and len(inputs) != topo.n:
        raise InvalidInput(f"expected {topo.n} inputs, got {len(inputs)}")
    s = op.size
    builder = ScheduleBuilder()
    files: dict[str, CloudFile] = {}
    init = InitialState()
    live = []
    for v in range(topo.n):
        init.add_payload(f"S{v}", s, None if inputs is None else inputs[v], holder=v)
        live.append(f"S{v}")
    now = 0
    horizons: list[int] = []
    history = [list(live)]
    j = 0
    while len(live) > 1:
        m = len(live)
        T = flow_write(topo, builder, {i: [(Piece(live[i], 0, s), f"x{j}_{i}", 0)] for i in range(m)},
                       now, files=files)
        horizons.append(T)
        now += T
        half = (m + 1) // 2
        T = flow_read(topo, builder, {i: [(f"x{j}_{2 * i}", 0, s)] for i in range(half)}, files, now)
        horizons.append(T)
        now += T
        pairs = {i: [(f"x{j}_{2 * i + 1}", 0, s)] for i in range(half) if 2 * i + 1 < m}
        T = flow_read(topo, builder, pairs, files, now)
        horizons.append(T)
        now += T
        nxt = []
        for i in range(half):
            if 2 * i + 1 < m:
                out = f"X{j + 1}_{i}"
                builder.compute(now, i, out, [live[2 * i], live[2 * i + 1]], s, op.apply, "pair")
                nxt.append(out)
            else:
                nxt.append(live[2 * i])  # odd tail pairs with the unit: the value passes through
        live = nxt
        history.append(list(live))
        j += 1
    T = flow_write(topo, builder, {0: [(Piece(live[0], 0, s), file, 0)]}, now, files=files)
    horizons.append(T)
    trace = run_schedule(topo, builder.build(), init)
    value = trace.file_value(file, s)
    t_s = max(horizons) if horizons else 0
    return CombineOutcome(value, trace.rounds_elapsed, trace,
                          {"horizons": horizons, "T_s": t_s, "iterations": j, "history": history})
