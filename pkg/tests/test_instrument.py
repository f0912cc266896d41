from __future__ import annotations

import io
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcadc.dc import Var, integrate, read_traces, write_trace
from dcadc.dca import Cell, CellConfig, DataInstance, IterationBatch, PopulationConfig, SyntheticConfig, batches, synthesize
from dcadc.errors import InstrumentationError, SchedulerOverflowError
from dcadc.instrument import (
    EventDurations,
    Layout,
    TraceRecorder,
    check_encoding,
    check_eq10,
    encoding_violations,
    immature_work,
    measure,
    record_cell,
    record_population,
)

from conftest import build_fig2


def fixed_cell(threshold: float) -> Cell:
    return Cell(CellConfig(threshold_range=(threshold, threshold)), np.random.default_rng(0))


def unit_batches(n, antigens=0):
    for k in range(n):
        yield IterationBatch(DataInstance.make_signal(k, (0, 1, 0)),
                             tuple(DataInstance.make_antigen(k, "x") for _ in range(antigens)))


def test_recorder_reproduces_golden_trace():
    trace, out = record_cell(fixed_cell(1), unit_batches(1, antigens=1), TraceRecorder())
    assert trace == build_fig2()
    assert len(out) == 1


def test_golden_trace_measurements(fig2):
    (rec,) = measure(fig2)
    assert (rec.mbar, rec.nbar, rec.int_i, rec.int_m, rec.c) == (1, 1, 5, 1, 6)
    assert check_eq10(rec, EventDurations())
    assert 5 == 1 * (1 + 1) + 1 * (1 + 1) + 1 * 1
    assert check_encoding(fig2)


def test_no_antigens_means_no_e3():
    trace, _ = record_cell(fixed_cell(3), unit_batches(3), TraceRecorder())
    assert integrate(trace, Var("E3"), (0, trace.horizon)) == 0


def test_no_maturation_gives_no_lifespans():
    trace, out = record_cell(fixed_cell(100), unit_batches(5), TraceRecorder())
    assert out == [] and measure(trace) == []


def test_immature_work_arithmetic():
    d = EventDurations(l1=1, l2=1, l4=1)
    assert immature_work(2, 0, d) == 6
    trace, _ = record_cell(fixed_cell(2), unit_batches(2), TraceRecorder(d))
    (rec,) = measure(trace)
    assert rec.int_i == 6 and check_eq10(rec, d)


def test_work_identity_requires_deterministic_model(fig2):
    (rec,) = measure(fig2)
    with pytest.raises(ValueError):
        check_eq10(rec, EventDurations(l1=(1, 3)))


def test_overlapping_states_are_rejected():
    from dcadc.dc import TimedTrace
    from dcadc.instrument import SCHEMA

    zero = {o.name: 0 for o in SCHEMA}
    bad = TimedTrace(SCHEMA, 2, ((0, {**zero, "I": 1, "M": 1, "E5": 1}),))
    with pytest.raises(InstrumentationError):
        measure(bad)


def test_overflow_detection():
    d = EventDurations(l1=2, l2=2, l4=2)
    with pytest.raises(SchedulerOverflowError):
        record_cell(fixed_cell(1), unit_batches(1), TraceRecorder(d, Layout.EVENT_TIME, iteration_ticks=5))
    rec = TraceRecorder(d, Layout.WALL_CLOCK, iteration_ticks=5, allow_overflow=True)
    trace, _ = record_cell(fixed_cell(1), unit_batches(1), rec)
    assert rec.overflows == 1 and trace.horizon == 7
    # antigen work counts against the same budget
    with pytest.raises(SchedulerOverflowError):
        record_cell(fixed_cell(1), unit_batches(1, antigens=1), TraceRecorder(EventDurations(), Layout.EVENT_TIME, iteration_ticks=4))


def test_wall_clock_lifespans():
    d = EventDurations(l1=1, l2=1, l4=1, l5=2)
    trace, _ = record_cell(fixed_cell(3), unit_batches(9), TraceRecorder(d, Layout.WALL_CLOCK, iteration_ticks=4))
    recs = measure(trace)
    assert [r.c for r in recs] == [3 * 4 + 2, 4 * 4, 4 * 4]
    assert all(r.int_m == 2 for r in recs)
    assert check_encoding(trace, idle_allowed=True)
    assert not check_encoding(trace)  # idle ticks carry I without an event


def test_corrupted_trace_fails_encoding(fig2):
    from dcadc.dc import TimedTrace

    segs = list(fig2.segments)
    segs[5] = (5, {**segs[5][1], "E1": 1})
    bad = TimedTrace(fig2.schema, fig2.horizon, tuple(segs))
    assert encoding_violations(bad) == [5]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_event_time_invariants(seed):
    rng = random.Random(seed)
    d = EventDurations(*(rng.randint(1, 3) for _ in range(5)))
    cfg = PopulationConfig(cell_count=3, cell_config=CellConfig(threshold_range=(2, 6)), seed=seed % 1000)
    inst, _ = synthesize(SyntheticConfig(iterations=30, antigens_per_iteration=rng.randint(0, 4), seed=seed % 1000))
    traces, log, _ = record_population(cfg, batches(inst), d)
    total = 0
    for tr in traces.values():
        assert check_encoding(tr)
        ticks = tr.ticks
        assert not np.any(ticks["E2"] & ticks["E3"])
        for rec in measure(tr):
            total += 1
            assert len(rec.episodes["E5"]) == 1
            assert len(rec.episodes["E4"]) == rec.mbar
            assert check_eq10(rec, d)
            assert rec.int_i == sum(iv.length for name in ("E1", "E2", "E3", "E4") for iv in rec.episodes[name])
            e5 = rec.episodes["E5"][0]
            assert all(iv.e <= e5.b for n in ("E1", "E2", "E3", "E4") for iv in rec.episodes[n])
    assert total == len(log)


def test_stochastic_durations_are_seeded():
    d = EventDurations(l1=(1, 3), l2=(1, 2))
    cfg = PopulationConfig(cell_count=2, seed=5)
    inst, _ = synthesize(SyntheticConfig(iterations=20, seed=5))
    a, _, _ = record_population(cfg, batches(inst), d)
    b, _, _ = record_population(cfg, batches(inst), d)
    assert a == b
    assert not d.deterministic


def test_multiplexed_trace_file():
    cfg = PopulationConfig(cell_count=3, seed=1)
    inst, _ = synthesize(SyntheticConfig(iterations=20, seed=1))
    traces, _, _ = record_population(cfg, batches(inst), EventDurations())
    buf = io.StringIO()
    for i, tr in traces.items():
        write_trace(tr, buf, cell=i)
    assert read_traces(buf.getvalue().splitlines()) == traces


def test_duration_validation():
    with pytest.raises(ValueError):
        EventDurations(l1=0)
    with pytest.raises(ValueError):
        EventDurations(l2=(3, 1))
    with pytest.raises(ValueError):
        TraceRecorder(layout=Layout.WALL_CLOCK)
