"""Record cell executions as timed traces over I, M and E1..E5.

A recorder listens to one cell's event notifications and lays the events
out back to back on a simulated tick clock using an event-duration model.

Two layouts are supported:

* event time: events are packed with no slack, so the integral of I over a
  lifespan is exactly the sum of its event durations;
* wall clock: every iteration occupies ``iteration_ticks`` ticks, padded with
  idle ticks (I=1, no event) after its events, and presentation gets its own
  slot of the same size.  The slack after a presentation belongs to the next
  lifespan.

Unless ``allow_overflow`` is set, an iteration (or presentation) whose events
do not fit in ``iteration_ticks`` raises :class:`SchedulerOverflowError`.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from .dc.semantics import integrate
from .dc.syntax import Var
from .dc.trace import Interval, Observable, TimedTrace
from .dca.cell import Cell, Presentation
from .dca.population import IterationBatch, Population, PopulationConfig
from .errors import InstrumentationError, SchedulerOverflowError

logger = logging.getLogger(__name__)

EVENTS = ("E1", "E2", "E3", "E4", "E5")
SCHEMA = tuple(Observable(n) for n in ("I", "M") + EVENTS)
IDLE = "idle"

DurationModel = Union[int, Tuple[int, int]]


def _check_model(name: str, d: DurationModel) -> DurationModel:
    if isinstance(d, (tuple, list)):
        lo, hi = (int(x) for x in d)
        if lo < 1 or hi < lo:
            raise ValueError(f"{name}: duration range must satisfy 1 <= lo <= hi, got {d}")
        return (lo, hi) if lo != hi else lo
    if int(d) != d or d < 1:
        raise ValueError(f"{name}: duration must be a positive whole number of ticks, got {d}")
    return int(d)


@dataclass(frozen=True)
class EventDurations:
    """Per-event durations in ticks: a constant or an inclusive uniform range."""

    l1: DurationModel = 1
    l2: DurationModel = 1
    l3: DurationModel = 1
    l4: DurationModel = 1
    l5: DurationModel = 1
    la: DurationModel = 1
    tick_seconds: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "l4", "l5", "la"):
            object.__setattr__(self, name, _check_model(name, getattr(self, name)))
        q = Fraction(self.tick_seconds) if not isinstance(self.tick_seconds, float) else Fraction(repr(self.tick_seconds))
        if q <= 0:
            raise ValueError("tick_seconds must be positive")
        object.__setattr__(self, "tick_seconds", q)

    @property
    def deterministic(self) -> bool:
        return all(isinstance(getattr(self, n), int) for n in ("l1", "l2", "l3", "l4", "l5", "la"))

    def of(self, event: str) -> DurationModel:
        return getattr(self, "l" + event[1:] if event.startswith("E") else event)

    def draw(self, event: str, rng: Optional[np.random.Generator]) -> int:
        d = self.of(event)
        if isinstance(d, int):
            return d
        if rng is None:
            raise ValueError(f"{event} has a random duration but no generator was supplied")
        return int(rng.integers(d[0], d[1] + 1))

    def constants(self) -> Dict[str, int]:
        if not self.deterministic:
            raise ValueError("duration model is not deterministic")
        return {n: getattr(self, n) for n in ("l1", "l2", "l3", "l4", "l5", "la")}


class Layout(enum.Enum):
    EVENT_TIME = "event"
    WALL_CLOCK = "wall"


_VALUATIONS = {
    "E1": {"I": 1, "E1": 1},
    "E2": {"I": 1, "E2": 1},
    "E3": {"I": 1, "E3": 1},
    "E4": {"I": 1, "E4": 1},
    "E5": {"M": 1, "E5": 1},
    IDLE: {"I": 1},
}


@dataclass
class TraceRecorder:
    """Observer that turns one cell's event notifications into a trace."""

    durations: EventDurations = field(default_factory=EventDurations)
    layout: Layout = Layout.EVENT_TIME
    iteration_ticks: Optional[int] = None
    allow_overflow: bool = False
    rng: Optional[np.random.Generator] = None
    now: int = 0
    spans: List[Tuple[int, int, str]] = field(default_factory=list)
    overflows: int = 0
    _iter_start: Optional[int] = None
    _deadline: Optional[int] = None

    def __post_init__(self):
        self.layout = Layout(self.layout)
        if self.iteration_ticks is not None and self.iteration_ticks < 1:
            raise ValueError("iteration_ticks must be positive")
        if self.layout is Layout.WALL_CLOCK and self.iteration_ticks is None:
            raise ValueError("wall-clock layout needs iteration_ticks")

    def __call__(self, event: str) -> None:
        if event == "iteration":
            self._begin_slot()
        elif event == "E5":
            self._begin_slot()
            self._place("E5")
        elif event in EVENTS:
            self._place(event)
        else:
            raise InstrumentationError(f"unknown event {event!r}")

    def _pad(self, until: int) -> None:
        if until > self.now:
            self._append(self.now, until, IDLE)
            self.now = until

    def _begin_slot(self) -> None:
        if self.layout is Layout.WALL_CLOCK and self._deadline is not None:
            self._pad(self._deadline)
        self._iter_start = self.now
        self._deadline = None if self.iteration_ticks is None else self.now + self.iteration_ticks

    def _place(self, event: str) -> None:
        d = self.durations.draw(event, self.rng)
        end = self.now + d
        if self._deadline is not None and end > self._deadline:
            if not self.allow_overflow:
                raise SchedulerOverflowError(
                    f"{event} ends at tick {end}, past the slot budget of {self.iteration_ticks} ticks "
                    f"starting at {self._iter_start}"
                )
            self.overflows += 1
        self._append(self.now, end, event)
        self.now = end

    def _append(self, b: int, e: int, what: str) -> None:
        if self.spans and self.spans[-1][2] == what == IDLE and self.spans[-1][1] == b:
            self.spans[-1] = (self.spans[-1][0], e, what)
        else:
            self.spans.append((b, e, what))

    def trace(self) -> TimedTrace:
        """The trace recorded so far, ending with the last placed event."""
        segs = []
        zero = {o.name: 0 for o in SCHEMA}
        for b, _, what in self.spans:
            segs.append((b, {**zero, **_VALUATIONS[what]}))
        return TimedTrace(SCHEMA, self.now, tuple(segs), self.durations.tick_seconds).normalized()


def record_cell(
    cell: Cell,
    batches: Iterable[IterationBatch],
    recorder: TraceRecorder,
    max_presentations: Optional[int] = None,
) -> Tuple[TimedTrace, List[Presentation]]:
    """Drive one cell through ``batches`` while recording; stop early after
    ``max_presentations`` presentations if given."""
    cell.observers.append(recorder)
    out: List[Presentation] = []
    try:
        for batch in batches:
            batch.validate()
            p = cell.run_iteration(batch.signal, batch.antigens)
            if p is not None:
                out.append(p)
                if max_presentations is not None and len(out) >= max_presentations:
                    break
    finally:
        cell.observers.remove(recorder)
    return recorder.trace(), out


def record_population(
    config: PopulationConfig,
    batches: Iterable[IterationBatch],
    durations: EventDurations,
    layout: Layout = Layout.EVENT_TIME,
    iteration_ticks: Optional[int] = None,
    allow_overflow: bool = False,
):
    """Run a population with one recorder per cell.

    Returns ``(traces by cell id, presentation log, recorders)``.
    """
    seeds = np.random.SeedSequence([config.seed, 1]).spawn(config.cell_count)
    recorders = [
        TraceRecorder(durations, layout, iteration_ticks, allow_overflow, np.random.default_rng(seeds[i]))
        for i in range(config.cell_count)
    ]
    with Population(config, observer_factory=lambda i: [recorders[i]]) as pop:
        log = pop.run(batches)
    return {i: r.trace() for i, r in enumerate(recorders)}, log, recorders


# -- measurement ------------------------------------------------------------


@dataclass(frozen=True)
class LifespanRecord:
    index: int
    interval: Interval
    mbar: int
    nbar: int
    episodes: Mapping[str, Tuple[Interval, ...]]
    int_i: int
    int_m: int

    @property
    def c(self) -> int:
        return self.int_i + self.int_m

    def seconds(self, ticks: int, tick_seconds: Fraction) -> Fraction:
        return ticks * tick_seconds


def _episodes(values: np.ndarray, lo: int, hi: int) -> Tuple[Interval, ...]:
    """Maximal runs of 1 in ``values[lo:hi]``, clipped to the window."""
    out = []
    t = lo
    while t < hi:
        if values[t]:
            s = t
            while t < hi and values[t]:
                t += 1
            out.append(Interval(s, t))
        else:
            t += 1
    return tuple(out)


def _rising_edges(values: np.ndarray, lo: int, hi: int) -> int:
    if hi <= lo:
        return 0
    window = values[lo:hi].astype(bool)
    prev = np.concatenate(([bool(values[lo - 1]) if lo > 0 else False], window[:-1]))
    return int(np.count_nonzero(window & ~prev))


def measure(trace: TimedTrace) -> List[LifespanRecord]:
    """Split a recorded trace into complete lifespans, each ending with E5."""
    missing = {o.name for o in SCHEMA} - set(trace.names)
    if missing:
        raise InstrumentationError(f"trace lacks observables {sorted(missing)}")
    ticks = trace.ticks
    both = np.flatnonzero(ticks["I"].astype(bool) & ticks["M"].astype(bool))
    if both.size:
        raise InstrumentationError(f"I and M both hold at tick {int(both[0])}")
    records = []
    start = 0
    for k, e5 in enumerate(_episodes(ticks["E5"], 0, trace.horizon)):
        iv = Interval(start, e5.e)
        eps = {name: _episodes(ticks[name], iv.b, iv.e) for name in EVENTS}
        records.append(
            LifespanRecord(
                index=k,
                interval=iv,
                mbar=_rising_edges(ticks["E2"], iv.b, iv.e),
                nbar=_rising_edges(ticks["E3"], iv.b, iv.e),
                episodes=eps,
                int_i=integrate(trace, Var("I"), iv),
                int_m=integrate(trace, Var("M"), iv),
            )
        )
        start = e5.e
    return records


def immature_work(mbar: int, nbar: int, durations: EventDurations) -> int:
    d = durations.constants()
    return mbar * (d["l1"] + d["l2"]) + nbar * (d["l1"] + d["l3"]) + mbar * d["l4"]


def check_eq10(rec: LifespanRecord, durations: EventDurations) -> bool:
    """Exact duration accounting of one event-time lifespan."""
    if not durations.deterministic:
        raise ValueError("duration accounting needs a deterministic duration model")
    return rec.int_i == immature_work(rec.mbar, rec.nbar, durations) and rec.int_m == durations.l5


def encoding_violations(trace: TimedTrace, idle_allowed: bool = False) -> List[int]:
    """Ticks where the state/event encoding fails.

    I must coincide with some pre-migration event pattern and M with E5;
    E2 and E3 never overlap.  With ``idle_allowed`` (wall-clock layout), I may
    also hold with no event active.
    """
    v = {n: trace.ticks[n].astype(bool) for n in trace.names}
    busy = v["E1"] | (v["E2"] & ~v["E3"]) | (~v["E2"] & v["E3"]) | v["E4"]
    bad = (v["M"] != v["E5"]) | (v["E2"] & v["E3"]) | (v["I"] & v["M"])
    bad |= busy & ~v["I"]
    if not idle_allowed:
        bad |= v["I"] & ~busy
    return [int(t) for t in np.flatnonzero(bad)]


def check_encoding(trace: TimedTrace, idle_allowed: bool = False) -> bool:
    return not encoding_violations(trace, idle_allowed)
