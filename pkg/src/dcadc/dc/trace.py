"""Finite-variability timed traces on an integer tick grid."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from ..errors import InputError, OutOfRangeError, SchemaError
from .syntax import to_fraction

BOOLEAN = (0, 1)


@dataclass(frozen=True)
class Observable:
    name: str
    domain: Tuple[int, ...] = BOOLEAN

    def __post_init__(self):
        dom = tuple(int(d) for d in self.domain)
        if not dom or len(set(dom)) != len(dom):
            raise SchemaError(f"observable {self.name!r}: domain must be non-empty and duplicate-free")
        object.__setattr__(self, "domain", dom)


@dataclass(frozen=True, order=True)
class Interval:
    b: int
    e: int

    def __post_init__(self):
        if int(self.b) != self.b or int(self.e) != self.e:
            raise OutOfRangeError(f"interval endpoints must be ticks, got [{self.b}, {self.e}]")
        object.__setattr__(self, "b", int(self.b))
        object.__setattr__(self, "e", int(self.e))
        if self.b < 0 or self.b > self.e:
            raise OutOfRangeError(f"not an interval: [{self.b}, {self.e}]")

    @property
    def length(self) -> int:
        return self.e - self.b

    def __iter__(self):
        yield self.b
        yield self.e


IntervalLike = Union[Interval, Tuple[int, int]]


def as_interval(iv: IntervalLike) -> Interval:
    return iv if isinstance(iv, Interval) else Interval(*iv)


def _as_schema(schema) -> Tuple[Observable, ...]:
    out = []
    for o in schema:
        out.append(o if isinstance(o, Observable) else Observable(str(o)))
    names = [o.name for o in out]
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate observable names in {names}")
    return tuple(out)


@dataclass(frozen=True)
class TimedTrace:
    """Piecewise-constant interpretation of observables over ``[0, horizon)``.

    ``segments`` holds ``(start_tick, valuation)`` pairs; each segment is
    right-open and runs to the next start (the last one to the horizon).
    """

    schema: Tuple[Observable, ...]
    horizon: int
    segments: Tuple[Tuple[int, Mapping[str, int]], ...]
    tick_seconds: Fraction = Fraction(1)

    def __post_init__(self):
        schema = _as_schema(self.schema)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "tick_seconds", to_fraction(self.tick_seconds))
        if self.tick_seconds <= 0:
            raise SchemaError("tick_seconds must be positive")
        if self.horizon < 0:
            raise OutOfRangeError("negative horizon")
        domains = {o.name: o.domain for o in schema}
        segs = []
        prev = -1
        for start, val in self.segments:
            start = int(start)
            if start <= prev:
                raise SchemaError(f"segment starts must strictly increase (at {start})")
            if start >= self.horizon:
                raise SchemaError(f"segment start {start} not below horizon {self.horizon}")
            if set(val) != set(domains):
                missing = set(domains) - set(val)
                extra = set(val) - set(domains)
                raise SchemaError(f"segment at {start}: missing {sorted(missing)}, unknown {sorted(extra)}")
            frozen = {}
            for name, v in val.items():
                if int(v) not in domains[name]:
                    raise SchemaError(f"value {v} of {name!r} outside domain {domains[name]}")
                frozen[name] = int(v)
            segs.append((start, frozen))
            prev = start
        if self.horizon > 0 and (not segs or segs[0][0] != 0):
            raise SchemaError("first segment must start at 0")
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def from_changes(
        cls,
        schema,
        horizon: int,
        changes: Iterable[Tuple[int, Mapping[str, int]]],
        tick_seconds=Fraction(1),
        default: Optional[int] = None,
    ) -> "TimedTrace":
        """Build from change records; unset observables persist.

        With ``default`` set, observables never assigned start at that value.
        """
        schema = _as_schema(schema)
        current: Dict[str, int] = {} if default is None else {o.name: default for o in schema}
        segs: List[Tuple[int, Dict[str, int]]] = []
        for t, upd in changes:
            current = {**current, **{k: int(v) for k, v in upd.items()}}
            if segs and segs[-1][0] == t:
                segs[-1] = (t, current)
            else:
                segs.append((int(t), current))
        return cls(schema, horizon, tuple(segs), tick_seconds)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(o.name for o in self.schema)

    def observable(self, name: str) -> Observable:
        for o in self.schema:
            if o.name == name:
                return o
        raise SchemaError(f"unknown observable {name!r}")

    @cached_property
    def _starts(self) -> List[int]:
        return [s for s, _ in self.segments]

    def segment_index(self, t) -> int:
        if not (0 <= t < self.horizon):
            raise OutOfRangeError(f"time {t} outside [0, {self.horizon})")
        return bisect.bisect_right(self._starts, t) - 1

    def valuation_at(self, t) -> Mapping[str, int]:
        return self.segments[self.segment_index(t)][1]

    def spans(self) -> Iterator[Tuple[int, int, Mapping[str, int]]]:
        """Yield ``(start, end, valuation)`` for every segment."""
        for k, (s, val) in enumerate(self.segments):
            end = self.segments[k + 1][0] if k + 1 < len(self.segments) else self.horizon
            yield s, end, val

    @cached_property
    def ticks(self) -> Dict[str, np.ndarray]:
        """Per-tick value arrays, one per observable."""
        if self.horizon == 0:
            return {n: np.zeros(0, dtype=np.int64) for n in self.names}
        lengths = np.array([e - s for s, e, _ in self.spans()], dtype=np.int64)
        return {
            n: np.repeat(np.array([val[n] for _, val in self.segments], dtype=np.int64), lengths)
            for n in self.names
        }

    def seconds(self, ticks) -> Fraction:
        return ticks * self.tick_seconds

    def normalized(self) -> "TimedTrace":
        """Same interpretation with adjacent identical segments merged."""
        segs = []
        for s, val in self.segments:
            if segs and segs[-1][1] == val:
                continue
            segs.append((s, val))
        return TimedTrace(self.schema, self.horizon, tuple(segs), self.tick_seconds)


# -- JSON-lines file format -------------------------------------------------


def _schema_json(schema: Sequence[Observable]) -> list:
    return [o.name if o.domain == BOOLEAN else {"name": o.name, "domain": list(o.domain)} for o in schema]


def _schema_from_json(items) -> Tuple[Observable, ...]:
    out = []
    for it in items:
        if isinstance(it, str):
            out.append(Observable(it))
        else:
            out.append(Observable(it["name"], tuple(it.get("domain", BOOLEAN))))
    return tuple(out)


def _tick_seconds_json(q: Fraction):
    return int(q) if q.denominator == 1 else float(q)


def trace_records(trace: TimedTrace, cell=None) -> Iterator[dict]:
    header = {
        "schema": _schema_json(trace.schema),
        "horizon": trace.horizon,
        "tick_seconds": _tick_seconds_json(trace.tick_seconds),
    }
    if cell is not None:
        header = {"cell": cell, **header}
    yield header
    prev: Mapping[str, int] = {}
    for s, val in trace.segments:
        changed = {k: v for k, v in val.items() if prev.get(k) != v}
        rec = {"t": s, "set": changed}
        if cell is not None:
            rec = {"cell": cell, **rec}
        yield rec
        prev = val


def write_trace(trace: TimedTrace, fh: TextIO, cell=None) -> None:
    for rec in trace_records(trace, cell):
        fh.write(json.dumps(rec) + "\n")


def _parse_lines(lines: Iterable[str]) -> Iterator[Tuple[int, dict]]:
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"record {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise InputError(f"record {lineno}: expected an object")
        yield lineno, rec


def read_traces(lines: Iterable[str]) -> Dict[object, TimedTrace]:
    """Read a (possibly multiplexed) trace file; keys are cell ids or None."""
    headers: Dict[object, dict] = {}
    changes: Dict[object, list] = {}
    for lineno, rec in _parse_lines(lines):
        cell = rec.get("cell")
        if "schema" in rec:
            if cell in headers:
                raise InputError(f"record {lineno}: second header for cell {cell!r}")
            headers[cell] = rec
            changes[cell] = []
        elif "t" in rec:
            if cell not in headers:
                raise InputError(f"record {lineno}: change record before header")
            t = rec["t"]
            if not isinstance(t, int) or isinstance(t, bool):
                raise InputError(f"record {lineno}: tick must be an integer")
            changes[cell].append((t, rec.get("set", {})))
        else:
            raise InputError(f"record {lineno}: neither header nor change record")
    out = {}
    for cell, h in headers.items():
        try:
            out[cell] = TimedTrace.from_changes(
                _schema_from_json(h["schema"]),
                int(h["horizon"]),
                changes[cell],
                to_fraction(h.get("tick_seconds", 1)),
            )
        except (KeyError, SchemaError) as exc:
            raise InputError(f"trace for cell {cell!r}: {exc}") from None
    return out


def read_trace(lines: Iterable[str]) -> TimedTrace:
    traces = read_traces(lines)
    if len(traces) != 1:
        raise InputError(f"expected exactly one trace, found {len(traces)}")
    return next(iter(traces.values()))


def load_trace(path) -> TimedTrace:
    with open(path, encoding="utf-8") as fh:
        return read_trace(fh)
