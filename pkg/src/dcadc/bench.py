"""Offline versus segmented analysis latency on a simulated clock.

Each cell of a population is recorded in wall-clock layout, so its clock
advances one iteration period per signal plus one presentation slot per
lifespan.  Offline analysis can only start once every cell has consumed the
whole stream; a segment's result is ready one analysis duration after its
last item was presented.
"""

from __future__ import annotations

import dataclasses
import json
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import ByCount, SegmentationPolicy, analyse_offline, iter_items, report_from_items, segment
from .dca.cell import Presentation
from .dca.population import PopulationConfig, batches
from .dca.stream import SyntheticConfig, synthesize
from .instrument import EventDurations, Layout, measure, record_population


@dataclass(frozen=True)
class BenchConfig:
    m_values: Tuple[int, ...] = (100, 300, 1000, 3000)
    cells: int = 10
    antigens_per_iteration: int = 10
    iteration_ticks: int = 8
    durations: EventDurations = field(default_factory=lambda: EventDurations(1, 1, 1, 1, 2, 5, Fraction(1, 100)))
    policy: SegmentationPolicy = ByCount(50)
    seed: int = 0
    wall_clock: bool = False


@dataclass(frozen=True)
class BenchRow:
    m: int
    offline_time: float
    segments: int
    segment_latency_median: Optional[float]
    segment_latency_max: Optional[float]
    lifespans: int
    lifespan_ticks: int  # summed c over complete lifespans
    signals_in_lifespans: int  # summed mbar over complete lifespans


@dataclass
class BenchResult:
    rows: List[BenchRow]
    tick_seconds: Fraction
    wall_clock: bool = False

    def fit(self) -> Optional[Dict[str, float]]:
        """Least-squares line of offline completion time against m."""
        if len(self.rows) < 2:
            return None
        x = np.array([r.m for r in self.rows], dtype=float)
        y = np.array([r.offline_time for r in self.rows], dtype=float)
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
        return {"slope": float(slope), "intercept": float(intercept), "r2": r2}

    def expected_slope(self) -> Optional[float]:
        """Mean lifespan duration over mean signals per lifespan (seconds per signal)."""
        c = sum(r.lifespan_ticks for r in self.rows)
        mbar = sum(r.signals_in_lifespans for r in self.rows)
        return float(Fraction(c, mbar) * self.tick_seconds) if mbar else None

    def latency_spread(self) -> Optional[float]:
        """Largest over smallest per-m median segment latency."""
        medians = [r.segment_latency_median for r in self.rows if r.segment_latency_median]
        return max(medians) / min(medians) if medians else None

    def to_dict(self) -> dict:
        return {
            "clock": "wall" if self.wall_clock else "simulated",
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "fit": self.fit(),
            "expected_slope": self.expected_slope(),
            "segment_latency_spread": self.latency_spread(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_table(self) -> str:
        head = f"{'m':>6}  {'offline [s]':>12}  {'segments':>8}  {'seg median [s]':>14}  {'seg max [s]':>11}"
        lines = [head]
        for r in self.rows:
            med = "-" if r.segment_latency_median is None else f"{r.segment_latency_median:.4f}"
            mx = "-" if r.segment_latency_max is None else f"{r.segment_latency_max:.4f}"
            lines.append(f"{r.m:>6}  {r.offline_time:>12.4f}  {r.segments:>8}  {med:>14}  {mx:>11}")
        fit = self.fit()
        if fit:
            lines.append(f"fit: slope {fit['slope']:.6f} s/signal, intercept {fit['intercept']:.4f} s, R^2 {fit['r2']:.5f}")
            lines.append(f"mean c / mean mbar: {self.expected_slope():.6f} s/signal")
        return "\n".join(lines)


def _timed_presentations(log, recorders, tick: Fraction) -> List[Presentation]:
    """Presentations restamped with their simulated end time, in time order."""
    ends = {i: [e for b, e, what in rec.spans if what == "E5"] for i, rec in enumerate(recorders)}
    seen: Dict[int, int] = {}
    out = []
    for p in log:
        k = seen.get(p.cell_id, 0)
        seen[p.cell_id] = k + 1
        out.append((ends[p.cell_id][k], p.cell_id, k, p))
    out.sort(key=lambda x: x[:3])
    return [dataclasses.replace(p, time=float(t * tick)) for t, _, _, p in out]


def bench_one(m: int, cfg: BenchConfig) -> BenchRow:
    tick = cfg.durations.tick_seconds
    la = float(cfg.durations.la * tick)
    instances, _ = synthesize(SyntheticConfig(iterations=m, antigens_per_iteration=cfg.antigens_per_iteration,
                                              iteration_period=float(cfg.iteration_ticks * tick), seed=cfg.seed))
    pop_cfg = PopulationConfig(cell_count=cfg.cells, seed=cfg.seed)
    started = time.perf_counter()
    traces, log, recorders = record_population(pop_cfg, batches(instances), cfg.durations,
                                               Layout.WALL_CLOCK, cfg.iteration_ticks)
    if cfg.wall_clock:
        analyse_offline(log)
        offline = time.perf_counter() - started
    else:
        offline = float(max(r.now for r in recorders) * tick) + la
    timed = _timed_presentations(log, recorders, tick)
    latencies = []
    for seg in segment(iter_items(timed), cfg.policy):
        if cfg.wall_clock:
            t0 = time.perf_counter()
            report_from_items(seg.items)
            latencies.append(time.perf_counter() - t0)
        else:
            latencies.append(seg.items[-1].time + la - seg.items[0].time)
    records = [rec for tr in traces.values() for rec in measure(tr)]
    return BenchRow(
        m=m,
        offline_time=offline,
        segments=len(latencies),
        segment_latency_median=statistics.median(latencies) if latencies else None,
        segment_latency_max=max(latencies) if latencies else None,
        lifespans=len(records),
        lifespan_ticks=sum(r.c for r in records),
        signals_in_lifespans=sum(r.mbar for r in records),
    )


def run_bench(cfg: BenchConfig = BenchConfig(), m_values: Optional[Sequence[int]] = None) -> BenchResult:
    ms = cfg.m_values if m_values is None else tuple(m_values)
    return BenchResult([bench_one(m, cfg) for m in ms], cfg.durations.tick_seconds, cfg.wall_clock)
