"""Check the single-cell real-time requirement and design decisions on traces.

The formulas come from the bundled ``paper.dcspec``; the duration symbols
inside them are bound from the duration model through the valuation.
"""

from __future__ import annotations

import json
import logging
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .dc.parser import load_bundled_spec
from .dc.semantics import Valuation, eval_formula, first_violation, integrate
from .dc.syntax import Box, Formula, Var, to_fraction
from .dc.trace import Interval, TimedTrace
from .dca.cell import Cell, CellConfig, DataInstance
from .dca.population import IterationBatch
from .errors import InsufficientTraceError
from .instrument import EventDurations, Layout, LifespanRecord, TraceRecorder, measure, record_cell

logger = logging.getLogger(__name__)

THEOREM_FORMULAS = ("F1", "F2", "Des1", "Des2", "Req")


@dataclass(frozen=True)
class TheoremParams:
    """Real-time bound, iteration period, signals per lifespan and event durations (seconds)."""

    b: Fraction
    r: Fraction
    mbar: Fraction
    l1: Fraction = Fraction(1)
    l2: Fraction = Fraction(1)
    l3: Fraction = Fraction(1)
    l4: Fraction = Fraction(1)
    l5: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("b", "r", "mbar", "l1", "l2", "l3", "l4", "l5"):
            q = to_fraction(getattr(self, name))
            if q <= 0:
                raise ValueError(f"{name} must be positive, got {q}")
            object.__setattr__(self, name, q)

    @classmethod
    def from_ticks(cls, b: int, r: int, mbar: int, durations: EventDurations) -> "TheoremParams":
        q = durations.tick_seconds
        d = durations.constants()
        return cls(b * q, r * q, Fraction(mbar), *(d[f"l{i}"] * q for i in range(1, 6)))

    def bindings(self) -> Dict[str, Fraction]:
        return {n: getattr(self, n) for n in ("b", "r", "mbar", "l1", "l2", "l3", "l4", "l5")}

    def to_dict(self) -> Dict[str, str]:
        return {k: str(v) for k, v in self.bindings().items()}


@dataclass(frozen=True)
class TheoremSpec:
    formulas: Mapping[str, Formula]
    valuation: Valuation


def build_spec(params: TheoremParams) -> TheoremSpec:
    bundle = load_bundled_spec()
    formulas = {name: bundle.formulas[name] for name in THEOREM_FORMULAS}
    return TheoremSpec(formulas, bundle.valuation.update(params.bindings()))


@dataclass(frozen=True)
class Witness:
    formula: str
    interval: Interval
    start: Fraction
    end: Fraction
    values: Mapping[str, Fraction]

    def to_dict(self) -> dict:
        return {
            "formula": self.formula,
            "interval_ticks": [self.interval.b, self.interval.e],
            "interval_seconds": [str(self.start), str(self.end)],
            "values": {k: str(v) for k, v in self.values.items()},
        }


@dataclass(frozen=True)
class TheoremVerdict:
    des1_holds: bool
    des2_holds: bool
    req_holds: bool
    params: TheoremParams
    lifespans: int
    slack: Sequence[Fraction] = ()  # b - (int I + int M) per lifespan, seconds
    witnesses: Mapping[str, Witness] = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return self.des1_holds and self.des2_holds and self.req_holds

    @property
    def theorem_consistent(self) -> bool:
        return self.req_holds or not (self.des1_holds and self.des2_holds)

    def to_dict(self) -> dict:
        return {
            "des1": self.des1_holds,
            "des2": self.des2_holds,
            "req": self.req_holds,
            "lifespans": self.lifespans,
            "slack": [str(s) for s in self.slack],
            "params": self.params.to_dict(),
            "witnesses": {k: w.to_dict() for k, w in self.witnesses.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_text(self) -> str:
        lines = [f"{name}: {'holds' if ok else 'VIOLATED'}" for name, ok in
                 (("Des1", self.des1_holds), ("Des2", self.des2_holds), ("Req", self.req_holds))]
        for w in self.witnesses.values():
            vals = ", ".join(f"{k}={v}" for k, v in w.values.items())
            lines.append(f"  {w.formula} fails on [{w.start}, {w.end}] s ({vals})")
        return "\n".join(lines)


def _witness(trace: TimedTrace, name: str, inner: Formula, v: Valuation, window: Interval,
             keys: Sequence[str]) -> Optional[Witness]:
    iv = first_violation(trace, inner, v, window)
    if iv is None:
        return None
    values = {
        "int_I": integrate(trace, Var("I"), iv) * trace.tick_seconds,
        "int_M": integrate(trace, Var("M"), iv) * trace.tick_seconds,
        "len": iv.length * trace.tick_seconds,
    }
    values.update({k: v.lookup(k) for k in keys})
    return Witness(name, iv, iv.b * trace.tick_seconds, iv.e * trace.tick_seconds, values)


def _inner(f: Formula) -> Formula:
    return f.arg if isinstance(f, Box) else f


def check(trace: TimedTrace, params: TheoremParams) -> TheoremVerdict:
    """Des1 and Des2 over the whole trace; Req over each complete lifespan."""
    lifespans = measure(trace)
    if not lifespans:
        raise InsufficientTraceError("trace holds no complete lifespan")
    spec = build_spec(params)
    v = spec.valuation
    whole = Interval(0, trace.horizon)
    witnesses: Dict[str, Witness] = {}
    holds = {}
    for name, keys, windows in (
        ("Des1", ("l1", "l2", "l4", "r"), [whole]),
        ("Des2", ("l5", "r"), [whole]),
        ("Req", ("b", "r", "mbar"), [rec.interval for rec in lifespans]),
    ):
        f = spec.formulas[name]
        ok = True
        for window in windows:
            if eval_formula(trace, f, v, window):
                continue
            ok = False
            w = _witness(trace, name, _inner(f), v, window, keys)
            if w is not None:
                witnesses[name] = w
            break
        holds[name] = ok
    slack = [params.b - rec.c * trace.tick_seconds for rec in lifespans]
    return TheoremVerdict(holds["Des1"], holds["Des2"], holds["Req"], params, len(lifespans), tuple(slack), witnesses)


def check_phases(trace: TimedTrace, rec: LifespanRecord, v: Valuation = Valuation()) -> Dict[str, bool]:
    """F1 on the immature part of a lifespan and F2 on its presentation."""
    bundle = load_bundled_spec()
    e5 = rec.episodes["E5"][-1]
    return {
        "F1": eval_formula(trace, bundle.formulas["F1"], v, Interval(rec.interval.b, e5.b)),
        "F2": eval_formula(trace, bundle.formulas["F2"], v, Interval(e5.b, e5.e)),
    }


# -- the theorem experiment -------------------------------------------------


@dataclass(frozen=True)
class RunSetup:
    """One simulated lifespan experiment, all durations in ticks."""

    mbar: int
    r: int
    durations: EventDurations
    antigens_per_iteration: int
    allow_overflow: bool = False

    @property
    def b(self) -> int:
        return (self.mbar + 1) * self.r


Sampler = Callable[[np.random.Generator], RunSetup]
DEFAULT_TICK = Fraction(1, 10)


def conforming_sampler(rng: np.random.Generator, tick: Fraction = DEFAULT_TICK) -> RunSetup:
    """Durations that respect both design decisions, antigen work budgeted inside r."""
    mbar = int(rng.integers(1, 11))
    r = int(rng.integers(4, 13))
    l1 = int(rng.integers(1, r - 1))
    l2 = int(rng.integers(1, r - l1))
    l4 = int(rng.integers(1, r - l1 - l2 + 1))
    l3 = int(rng.integers(1, 4))
    l5 = int(rng.integers(1, r + 1))
    room = r - (l1 + l2 + l4)
    k = int(rng.integers(0, room // (l1 + l3) + 1))
    return RunSetup(mbar, r, EventDurations(l1, l2, l3, l4, l5, 1, tick), k)


def des1_violating_sampler(rng: np.random.Generator, tick: Fraction = DEFAULT_TICK) -> RunSetup:
    """Signal handling takes one and a half iterations; no antigens."""
    mbar = int(rng.integers(1, 11))
    r = 2 * int(rng.integers(2, 7))
    total = 3 * r // 2
    l1 = int(rng.integers(1, total - 1))
    l2 = int(rng.integers(1, total - l1))
    l4 = total - l1 - l2
    l5 = int(rng.integers(1, r + 1))
    return RunSetup(mbar, r, EventDurations(l1, l2, 1, l4, l5, 1, tick), 0, allow_overflow=True)


def des2_violating_sampler(rng: np.random.Generator, tick: Fraction = DEFAULT_TICK) -> RunSetup:
    """Presentation takes one and a half iterations."""
    setup = conforming_sampler(rng, tick)
    r = setup.r if setup.r % 2 == 0 else setup.r + 1
    d = setup.durations
    return RunSetup(setup.mbar, r, EventDurations(d.l1, d.l2, d.l3, d.l4, 3 * r // 2, 1, tick),
                    setup.antigens_per_iteration, allow_overflow=True)


VIOLATIONS = {"des1": des1_violating_sampler, "des2": des2_violating_sampler}


def simulate_run(setup: RunSetup, lifespans: int = 2) -> TimedTrace:
    """Record a single cell in wall-clock layout for ``lifespans`` presentations.

    The cell's threshold equals ``mbar`` and every signal adds exactly one to
    its costimulation, so each lifespan processes exactly ``mbar`` signals.
    """
    config = CellConfig(threshold_range=(float(setup.mbar), float(setup.mbar)))
    cell = Cell(config, np.random.default_rng(0))
    recorder = TraceRecorder(setup.durations, Layout.WALL_CLOCK, setup.r, setup.allow_overflow)

    def stream():
        k = 0
        while True:
            t = float(k * setup.r * setup.durations.tick_seconds)
            antigens = tuple(DataInstance.make_antigen(t, "x", f"{k}.{j}") for j in range(setup.antigens_per_iteration))
            yield IterationBatch(DataInstance.make_signal(t, (0.0, 1.0, 0.0)), antigens)
            k += 1

    trace, _ = record_cell(cell, stream(), recorder, max_presentations=lifespans)
    return trace


@dataclass(frozen=True)
class RunResult:
    index: int
    setup: RunSetup
    verdict: TheoremVerdict


@dataclass
class ExperimentSummary:
    runs: List[RunResult] = field(default_factory=list)
    mode: str = "conforming"

    @property
    def n(self) -> int:
        return len(self.runs)

    def count(self, attr: str) -> int:
        return sum(getattr(r.verdict, attr) for r in self.runs)

    @property
    def exceptions(self) -> List[RunResult]:
        """Runs where both design decisions hold but the requirement fails."""
        return [r for r in self.runs if not r.verdict.theorem_consistent]

    @property
    def passed(self) -> bool:
        if self.mode == "conforming":
            return self.count("req_holds") == self.n and not self.exceptions
        return not self.exceptions

    def slack_stats(self) -> Optional[Dict[str, float]]:
        values = [float(s) for r in self.runs for s in r.verdict.slack]
        if not values:
            return None
        return {"min": min(values), "mean": statistics.fmean(values), "max": max(values)}

    def to_dict(self) -> dict:
        first_bad = next((r for r in self.runs if not r.verdict.all_hold), None)
        return {
            "mode": self.mode,
            "runs": self.n,
            "des1_holds": self.count("des1_holds"),
            "des2_holds": self.count("des2_holds"),
            "req_holds": self.count("req_holds"),
            "exceptions": len(self.exceptions),
            "slack_seconds": self.slack_stats(),
            "example_violation": None if first_bad is None else {"run": first_bad.index, **first_bad.verdict.to_dict()},
            "passed": self.passed,
        }

    def to_text(self) -> str:
        lines = [
            f"mode: {self.mode}, runs: {self.n}",
            f"Des1 holds {self.count('des1_holds')}/{self.n}, Des2 holds {self.count('des2_holds')}/{self.n}, "
            f"Req holds {self.count('req_holds')}/{self.n}",
            f"design decisions held but Req failed: {len(self.exceptions)}",
        ]
        stats = self.slack_stats()
        if stats:
            lines.append("slack b - (int I + int M) [s]: min {min:.3f}, mean {mean:.3f}, max {max:.3f}".format(**stats))
        bad = next((r for r in self.runs if not r.verdict.all_hold), None)
        if bad is not None:
            lines.append(f"first violating run: #{bad.index}")
            lines.append(bad.verdict.to_text())
        return "\n".join(lines)


def theorem1_experiment(
    n_runs: int = 1000,
    seed: int = 0,
    sampler: Optional[Sampler] = None,
    violate: Optional[str] = None,
    lifespans: int = 2,
) -> ExperimentSummary:
    """Simulate ``n_runs`` lifespans pairs and check each against the requirement."""
    if violate is not None and violate not in VIOLATIONS:
        raise ValueError(f"unknown violation mode {violate!r}; choose from {sorted(VIOLATIONS)}")
    if sampler is None:
        sampler = VIOLATIONS[violate] if violate else conforming_sampler
    summary = ExperimentSummary(mode=violate or "conforming")
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(n_runs)):
        setup = sampler(np.random.default_rng(ss))
        trace = simulate_run(setup, lifespans)
        params = TheoremParams.from_ticks(setup.b, setup.r, setup.mbar, setup.durations)
        verdict = check(trace, params)
        summary.runs.append(RunResult(i, setup, verdict))
        if not verdict.theorem_consistent:
            logger.error("run %d: design decisions hold but Req fails", i)
    return summary
