"""Offline and segmented analysis of presentation logs.

The anomaly score of an antigen type is its MCAV: the fraction of its
presentations made in the mature (anomalous) context.  Counts are kept as
integers so that segment reports merge exactly into the offline report.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .dca.cell import Presentation
from .errors import InputError, MergeError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = Fraction(1, 2)


@dataclass(frozen=True)
class Item:
    """One presented antigen: position in the log, time, type, context bit."""

    index: int
    time: float
    antigen_type: str
    mature: int


@dataclass
class PresentationLog:
    presentations: List[Presentation] = field(default_factory=list)
    iterations: int = 0

    def append(self, p: Presentation) -> None:
        if self.presentations and p.time < self.presentations[-1].time:
            raise InputError(f"presentation at t={p.time} precedes t={self.presentations[-1].time}")
        self.presentations.append(p)

    def extend(self, ps: Iterable[Presentation]) -> None:
        for p in ps:
            self.append(p)

    def __len__(self) -> int:
        return len(self.presentations)

    def __iter__(self) -> Iterator[Presentation]:
        return iter(self.presentations)

    @property
    def time_bounds(self) -> Optional[Tuple[float, float]]:
        if not self.presentations:
            return None
        return self.presentations[0].time, self.presentations[-1].time

    def items(self) -> Iterator[Item]:
        return iter_items(self.presentations)

    def __add__(self, other: "PresentationLog") -> "PresentationLog":
        out = PresentationLog(list(self.presentations), self.iterations + other.iterations)
        out.extend(other.presentations)
        return out


def iter_items(presentations: Iterable[Presentation], start: int = 0) -> Iterator[Item]:
    k = start
    for p in presentations:
        for antigen_type, bit in p.items:
            yield Item(k, p.time, antigen_type, bit)
            k += 1


@dataclass(frozen=True)
class Window:
    """Coverage of a report: item index range ``[first, stop)`` and time span."""

    first: int
    stop: int
    t_start: Optional[float] = None
    t_end: Optional[float] = None
    segment_id: Optional[int] = None

    def overlaps(self, other: "Window") -> bool:
        return self.first < other.stop and other.first < self.stop and self.first < self.stop and other.first < other.stop


@dataclass(frozen=True)
class McavReport:
    counts: Tuple[Tuple[str, int, int], ...] = ()  # (type, mature, total), sorted by type
    threshold: Fraction = DEFAULT_THRESHOLD
    window: Optional[Window] = None

    def __post_init__(self):
        for t, mature, total in self.counts:
            if total <= 0 or not (0 <= mature <= total):
                raise ValueError(f"bad counts for {t!r}: {mature}/{total}")

    @property
    def types(self) -> Tuple[str, ...]:
        return tuple(t for t, _, _ in self.counts)

    def get(self, antigen_type: str) -> Tuple[int, int]:
        for t, mature, total in self.counts:
            if t == antigen_type:
                return mature, total
        raise KeyError(antigen_type)

    def mcav(self, antigen_type: str) -> Fraction:
        mature, total = self.get(antigen_type)
        return Fraction(mature, total)

    def anomalous(self, antigen_type: str) -> bool:
        return self.mcav(antigen_type) > self.threshold

    def rows(self) -> List[dict]:
        return [
            {
                "type": t,
                "mature": mature,
                "total": total,
                "mcav": float(Fraction(mature, total)),
                "anomalous": Fraction(mature, total) > self.threshold,
            }
            for t, mature, total in self.counts
        ]

    def to_json(self) -> str:
        return json.dumps(self.rows())

    def to_table(self) -> str:
        header = ("type", "mature", "total", "mcav", "anomalous")
        body = [(r["type"], str(r["mature"]), str(r["total"]), f"{r['mcav']:.4f}", "yes" if r["anomalous"] else "no") for r in self.rows()]
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        for row in body:
            lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))))
        return "\n".join(lines)


def _threshold(tau) -> Fraction:
    return tau if isinstance(tau, Fraction) else Fraction(str(tau))


def report_from_items(items: Sequence[Item], tau=DEFAULT_THRESHOLD, segment_id: Optional[int] = None) -> McavReport:
    tally: Dict[str, List[int]] = {}
    for it in items:
        c = tally.setdefault(it.antigen_type, [0, 0])
        c[0] += it.mature
        c[1] += 1
    window = None
    if items:
        window = Window(items[0].index, items[-1].index + 1, items[0].time, items[-1].time, segment_id)
    counts = tuple((t, m, n) for t, (m, n) in sorted(tally.items()))
    return McavReport(counts, _threshold(tau), window)


def analyse_offline(log: Union[PresentationLog, Iterable[Presentation]], tau=DEFAULT_THRESHOLD) -> McavReport:
    """Aggregate the whole log into one report."""
    presentations = log.presentations if isinstance(log, PresentationLog) else list(log)
    return report_from_items(list(iter_items(presentations)), tau)


def merge(reports: Sequence[McavReport]) -> McavReport:
    """Sum counts over disjoint reports; MCAV follows from the summed counts."""
    if not reports:
        return McavReport()
    thresholds = {r.threshold for r in reports}
    if len(thresholds) > 1:
        raise MergeError(f"reports use different thresholds {sorted(thresholds)}")
    windows = [r.window for r in reports if r.window is not None]
    for i, a in enumerate(windows):
        for b in windows[i + 1 :]:
            if a.overlaps(b):
                raise MergeError(f"overlapping windows [{a.first}, {a.stop}) and [{b.first}, {b.stop})")
    tally: Dict[str, List[int]] = {}
    for r in reports:
        for t, mature, total in r.counts:
            c = tally.setdefault(t, [0, 0])
            c[0] += mature
            c[1] += total
    window = None
    if windows:
        starts = [w.t_start for w in windows if w.t_start is not None]
        ends = [w.t_end for w in windows if w.t_end is not None]
        window = Window(
            min(w.first for w in windows),
            max(w.stop for w in windows),
            min(starts) if starts else None,
            max(ends) if ends else None,
        )
    counts = tuple((t, m, n) for t, (m, n) in sorted(tally.items()))
    return McavReport(counts, thresholds.pop(), window)


# -- segmentation -----------------------------------------------------------


@dataclass(frozen=True)
class ByCount:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("segment size must be at least 1")


@dataclass(frozen=True)
class ByTime:
    period: float
    origin: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("segment period must be positive")

    def slot(self, t: float) -> int:
        return math.floor((t - self.origin) / self.period)


SegmentationPolicy = Union[ByCount, ByTime]


@dataclass(frozen=True)
class Segment:
    segment_id: int
    items: Tuple[Item, ...]
    close_time: float


def segment(items: Iterable[Item], policy: SegmentationPolicy, first_id: int = 0) -> Iterator[Segment]:
    """Slice an item stream; the trailing partial segment is emitted too.

    ``first_id`` numbers count-based segments when resuming a stream; time
    segments are always numbered by their period slot.
    """
    buf: List[Item] = []
    if isinstance(policy, ByCount):
        seg_id = first_id
        for it in items:
            buf.append(it)
            if len(buf) == policy.size:
                yield Segment(seg_id, tuple(buf), it.time)
                seg_id += 1
                buf = []
        if buf:
            yield Segment(seg_id, tuple(buf), buf[-1].time)
        return
    slot = None
    last_time = None
    for it in items:
        if last_time is not None and it.time < last_time:
            raise InputError(f"item at t={it.time} out of time order")
        last_time = it.time
        k = policy.slot(it.time)
        if slot is not None and k != slot and buf:
            yield Segment(slot, tuple(buf), policy.origin + (slot + 1) * policy.period)
            buf = []
        slot = k
        buf.append(it)
    if buf:
        yield Segment(slot, tuple(buf), policy.origin + (slot + 1) * policy.period)


class SegmentedAnalysis:
    """Incremental per-segment analysis alongside a running detector."""

    def __init__(self, policy: SegmentationPolicy, tau=DEFAULT_THRESHOLD,
                 on_close: Optional[Callable[[Segment, McavReport], None]] = None):
        self.policy = policy
        self.tau = _threshold(tau)
        self.on_close = on_close
        self.reports: List[McavReport] = []
        self.cumulative = McavReport(threshold=self.tau)
        self._next_index = 0
        self._pending: List[Item] = []

    def _close(self, seg: Segment) -> McavReport:
        rep = report_from_items(seg.items, self.tau, seg.segment_id)
        self.reports.append(rep)
        self.cumulative = merge([self.cumulative, rep])
        logger.info("segment %s closed at t=%s with %d items", seg.segment_id, seg.close_time, len(seg.items))
        if self.on_close is not None:
            self.on_close(seg, rep)
        return rep

    def feed(self, presentations: Iterable[Presentation]) -> List[McavReport]:
        """Add presentations; returns reports of segments closed by them."""
        new = list(iter_items(presentations, self._next_index))
        self._next_index += len(new)
        self._pending.extend(new)
        segs = list(segment(self._pending, self.policy, len(self.reports)))
        if not segs:
            return []
        # the last slice may still grow
        *closed, last = segs
        if isinstance(self.policy, ByCount) and len(last.items) == self.policy.size:
            closed.append(last)
            self._pending = []
        else:
            self._pending = list(last.items)
        return [self._close(s) for s in closed]

    def finish(self) -> List[McavReport]:
        out = [self._close(s) for s in list(segment(self._pending, self.policy, len(self.reports)))]
        self._pending = []
        return out


def analyse_segmented(
    log: Union[PresentationLog, Iterable[Presentation]],
    policy: SegmentationPolicy,
    tau=DEFAULT_THRESHOLD,
) -> Tuple[List[McavReport], McavReport]:
    presentations = log.presentations if isinstance(log, PresentationLog) else list(log)
    reports = [report_from_items(s.items, tau, s.segment_id) for s in segment(iter_items(presentations), policy)]
    cumulative = merge(reports) if reports else McavReport(threshold=_threshold(tau))
    return reports, cumulative


# -- latency of offline analysis --------------------------------------------


@dataclass(frozen=True)
class LatencyParams:
    c: float  # duration of one lifespan
    mbar: float  # mean signals per lifespan
    m: float  # total signal instances
    la: float  # analysis duration
    b: float  # real-time bound

    def __post_init__(self):
        if self.c <= 0 or self.mbar <= 0 or self.b <= 0:
            raise ValueError("c, mbar and b must be positive")
        if self.m < 0 or self.la < 0:
            raise ValueError("m and la must be non-negative")


def offline_completion_time(p: LatencyParams):
    return p.c * p.m / p.mbar + p.la


def offline_deadline_ok(p: LatencyParams) -> bool:
    return offline_completion_time(p) <= p.b
