from __future__ import annotations

from fractions import Fraction

from dcadc.analysis import ByTime
from dcadc.bench import BenchConfig, BenchResult, BenchRow, run_bench


def test_empty_and_single_row():
    assert run_bench(BenchConfig(), m_values=()).rows == []
    res = run_bench(BenchConfig(cells=3, antigens_per_iteration=3), m_values=(20,))
    assert res.fit() is None and len(res.rows) == 1
    assert res.rows[0].offline_time > 0


def test_offline_time_grows_with_stream_length():
    res = run_bench(BenchConfig(cells=3, antigens_per_iteration=3), m_values=(20, 60, 120))
    times = [r.offline_time for r in res.rows]
    assert times == sorted(times)
    fit = res.fit()
    assert fit["slope"] > 0 and fit["r2"] > 0.95


def test_time_segments_have_bounded_latency():
    res = run_bench(BenchConfig(cells=3, antigens_per_iteration=3, policy=ByTime(0.5)), m_values=(40, 160))
    spread = res.latency_spread()
    assert spread is not None and spread < 2
    assert all(r.segment_latency_max <= 0.5 + 0.05 for r in res.rows)


def test_fit_arithmetic():
    rows = [BenchRow(m, 2.0 * m + 3.0, 0, None, None, 1, 10, 5) for m in (1, 2, 3)]
    res = BenchResult(rows, Fraction(1, 10))
    fit = res.fit()
    assert abs(fit["slope"] - 2.0) < 1e-9 and abs(fit["intercept"] - 3.0) < 1e-9
    assert abs(fit["r2"] - 1.0) < 1e-12
    assert res.expected_slope() == 0.2  # 30 ticks over 15 signals at 0.1 s per tick
    assert res.latency_spread() is None
    assert "fit:" in res.to_table()
