from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dcadc.analysis import (
    ByCount,
    ByTime,
    LatencyParams,
    McavReport,
    PresentationLog,
    SegmentedAnalysis,
    analyse_offline,
    analyse_segmented,
    iter_items,
    merge,
    offline_completion_time,
    offline_deadline_ok,
    segment,
)
from dcadc.dca import Presentation
from dcadc.errors import InputError, MergeError


def pres(t, items):
    return Presentation(t, tuple(items), 1, len(items))


def random_log(rng: random.Random, n: int = 30):
    t = 0.0
    out = []
    for _ in range(n):
        t += rng.choice((0.0, 0.5, 1.0, 2.5))
        bit = rng.randint(0, 1)
        out.append(pres(t, [(rng.choice("ABC"), bit) for _ in range(rng.randint(0, 4))]))
    return out


def test_mcav_hand_count():
    log = [pres(0, [("A", 1)]), pres(1, [("A", 1), ("A", 0)]), pres(2, [("A", 1)])]
    r = analyse_offline(log)
    assert r.get("A") == (3, 4) and r.mcav("A") == Fraction(3, 4) and r.anomalous("A")


def test_all_semi_gives_zero():
    r = analyse_offline([pres(0, [("A", 0), ("B", 0)])])
    assert r.mcav("A") == 0 == r.mcav("B")


def test_empty_log_and_absent_types():
    r = analyse_offline(PresentationLog())
    assert r.counts == ()
    with pytest.raises(KeyError):
        r.mcav("A")


def test_counts_are_additive():
    rng = random.Random(0)
    a, b = random_log(rng), random_log(rng)
    b = [pres(p.time + 100, p.items) for p in b]
    la, lb = PresentationLog(list(a)), PresentationLog(list(b))
    whole = analyse_offline(la + lb)
    ra, rb = dict((t, (m, n)) for t, m, n in analyse_offline(la).counts), dict((t, (m, n)) for t, m, n in analyse_offline(lb).counts)
    for t, m, n in whole.counts:
        assert (m, n) == tuple(x + y for x, y in zip(ra.get(t, (0, 0)), rb.get(t, (0, 0))))


def test_log_rejects_time_going_backwards():
    log = PresentationLog()
    log.append(pres(2, []))
    with pytest.raises(InputError):
        log.append(pres(1, []))


def test_by_count_sizes():
    items = list(iter_items([pres(k, [("A", 1)]) for k in range(10)]))
    assert [len(s.items) for s in segment(items, ByCount(4))] == [4, 4, 2]


def test_by_time_single_period_and_boundaries():
    items = list(iter_items([pres(t, [("A", 1)]) for t in (0.0, 0.2, 0.9)]))
    assert len(list(segment(items, ByTime(1.0)))) == 1
    items = list(iter_items([pres(t, [("A", 1)]) for t in (0.0, 1.0, 1.5, 3.2)]))
    segs = list(segment(items, ByTime(1.0)))
    assert [s.segment_id for s in segs] == [0, 1, 3]
    assert [len(s.items) for s in segs] == [1, 2, 1]  # boundaries are right-open
    assert [s.close_time for s in segs] == [1.0, 2.0, 4.0]


def test_segment_replay_is_stable():
    log = random_log(random.Random(3))
    a = list(segment(iter_items(log), ByTime(2.0)))
    b = list(segment(iter_items(log), ByTime(2.0)))
    assert a == b


def test_merged_count_arithmetic():
    s1 = analyse_offline([pres(0, [("A", 1), ("A", 1), ("A", 0)])])
    s2 = analyse_offline([pres(1, [("A", 1), ("A", 0)])])
    s2 = McavReport(s2.counts, s2.threshold, None)
    m = merge([s1, s2])
    assert m.mcav("A") == Fraction(3, 5)
    assert merge([]).counts == ()


def test_merge_rejects_overlap_and_threshold_mismatch():
    log = [pres(k, [("A", k % 2)]) for k in range(6)]
    reps, _ = analyse_segmented(log, ByCount(2))
    with pytest.raises(MergeError):
        merge([reps[0], reps[0]])
    with pytest.raises(MergeError):
        merge([analyse_offline(log, 0.5), analyse_offline(log, 0.7)])


def test_single_segment_equals_offline():
    log = random_log(random.Random(5))
    reps, cumulative = analyse_segmented(log, ByCount(10**6))
    assert len(reps) == 1 and reps[0].counts == analyse_offline(log).counts == cumulative.counts


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([ByCount(1), ByCount(3), ByCount(7), ByTime(0.5), ByTime(1.3), ByTime(4.0)]))
def test_segmented_equals_offline(seed, policy):
    log = random_log(random.Random(seed))
    reps, cumulative = analyse_segmented(log, policy)
    assert cumulative.counts == analyse_offline(log).counts
    assert sum(r.window.stop - r.window.first for r in reps) == sum(len(p.items) for p in log)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([ByCount(2), ByTime(1.0)]))
def test_incremental_analysis_matches_batch(seed, policy):
    log = random_log(random.Random(seed))
    closed = []
    live = SegmentedAnalysis(policy, on_close=lambda seg, rep: closed.append(seg.segment_id))
    for p in log:
        live.feed([p])
    live.finish()
    reps, cumulative = analyse_segmented(log, policy)
    assert live.reports == reps
    assert live.cumulative.counts == cumulative.counts
    assert closed == [r.window.segment_id for r in reps]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mcav_bounds_and_monotone_response(seed):
    log = random_log(random.Random(seed))
    r = analyse_offline(log)
    for t in r.types:
        assert 0 <= r.mcav(t) <= 1
    bumped = analyse_offline(log + [pres(log[-1].time + 1, [("A", 1)])])
    before = r.mcav("A") if "A" in r.types else Fraction(0)
    assert bumped.mcav("A") >= before


def test_report_outputs():
    r = analyse_offline([pres(0, [("A", 1), ("B", 0)])])
    rows = json.loads(r.to_json())
    assert rows[0] == {"type": "A", "mature": 1, "total": 1, "mcav": 1.0, "anomalous": True}
    lines = r.to_table().splitlines()
    assert lines[0].split() == ["type", "mature", "total", "mcav", "anomalous"]
    assert len({len(line) for line in lines}) == 1


def test_offline_deadline_examples():
    assert offline_completion_time(LatencyParams(11, 10, 100, 5, 200)) == 115
    assert offline_deadline_ok(LatencyParams(11, 10, 100, 5, 200))
    assert not offline_deadline_ok(LatencyParams(11, 10, 1000, 5, 200))
    assert offline_deadline_ok(LatencyParams(11, 10, 0, 5, 5))
    assert not offline_deadline_ok(LatencyParams(11, 10, 0, 6, 5))


@given(st.integers(0, 5000), st.integers(0, 5000), st.integers(1, 5000), st.integers(1, 5000))
def test_deadline_monotonicity(m1, m2, b1, b2):
    p = lambda m, b: LatencyParams(Fraction(11), Fraction(10), m, Fraction(5), b)  # noqa: E731
    if m1 <= m2:
        assert offline_deadline_ok(p(m1, b1)) >= offline_deadline_ok(p(m2, b1))
    if b1 <= b2:
        assert offline_deadline_ok(p(m1, b1)) <= offline_deadline_ok(p(m1, b2))
