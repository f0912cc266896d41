"""Input streams: JSON-lines and CSV readers, plus a labelled synthetic generator.

JSON-lines records look like::

    {"t": 0.0, "kind": "signal", "signal": [0.1, 0.2, 1.0]}
    {"t": 0.1, "kind": "antigen", "type": "scan", "id": "a17"}

``signal`` may also be an object keyed by category name.  A leading record
carrying a ``"stream"`` key is a header and is skipped.  CSV files need a
header row with ``t`` and ``kind``, one column per signal category, and
``type``/``id`` columns for antigens.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from ..errors import InputError
from .cell import DEFAULT_CATEGORIES, DataInstance, classify

HEADER_KEY = "stream"


def _number(value, recno: int, what: str) -> float:
    if isinstance(value, bool):
        raise InputError(f"record {recno}: {what} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InputError(f"record {recno}: {what} must be a number, got {value!r}") from None


def instance_from_record(rec: dict, recno: int, categories: Sequence[str] = DEFAULT_CATEGORIES) -> DataInstance:
    if "t" not in rec:
        raise InputError(f"record {recno}: missing 't'")
    t = _number(rec["t"], recno, "'t'")
    kind = rec.get("kind")
    if kind == "signal":
        raw = rec.get("signal")
        if isinstance(raw, dict):
            missing = [c for c in categories if c not in raw]
            if missing:
                raise InputError(f"record {recno}: signal lacks categories {missing}")
            raw = [raw[c] for c in categories]
        if not isinstance(raw, list) or len(raw) != len(categories):
            raise InputError(f"record {recno}: signal must list {len(categories)} values")
        inst = DataInstance.make_signal(t, [_number(x, recno, "signal value") for x in raw])
    elif kind == "antigen":
        if not rec.get("type"):
            raise InputError(f"record {recno}: antigen without 'type'")
        aid = rec.get("id")
        inst = DataInstance.make_antigen(t, str(rec["type"]), None if aid is None else str(aid))
    else:
        raise InputError(f"record {recno}: kind must be 'signal' or 'antigen', got {kind!r}")
    try:
        classify(inst)
    except InputError as exc:
        raise InputError(f"record {recno}: {exc}") from None
    return inst


def instance_to_record(inst: DataInstance) -> dict:
    if inst.signal is not None:
        return {"t": inst.timestamp, "kind": "signal", "signal": list(inst.signal)}
    rec = {"t": inst.timestamp, "kind": "antigen", "type": inst.antigen_type}
    if inst.antigen_id is not None:
        rec["id"] = inst.antigen_id
    return rec


def read_jsonl(lines: Iterable[str], categories: Sequence[str] = DEFAULT_CATEGORIES) -> Iterator[DataInstance]:
    for recno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"record {recno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise InputError(f"record {recno}: expected an object")
        if HEADER_KEY in rec:
            continue
        yield instance_from_record(rec, recno, categories)


def read_csv(fh: TextIO, categories: Sequence[str] = DEFAULT_CATEGORIES) -> Iterator[DataInstance]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        return
    cols = set(reader.fieldnames)
    if not {"t", "kind"} <= cols:
        raise InputError("record 1: CSV header needs 't' and 'kind' columns")
    for recno, row in enumerate(reader, 2):
        kind = (row.get("kind") or "").strip()
        rec: dict = {"t": row.get("t"), "kind": kind}
        if kind == "signal":
            missing = [c for c in categories if c not in cols]
            if missing:
                raise InputError(f"record {recno}: CSV lacks signal columns {missing}")
            rec["signal"] = [row[c] for c in categories]
        else:
            rec["type"] = row.get("type")
            if row.get("id"):
                rec["id"] = row["id"]
        yield instance_from_record(rec, recno, categories)


def read_stream(path, categories: Sequence[str] = DEFAULT_CATEGORIES) -> List[DataInstance]:
    """Load a whole stream file; the format follows the extension (``.csv`` or JSON-lines)."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        if path.suffix.lower() == ".csv":
            return list(read_csv(fh, categories))
        return list(read_jsonl(fh, categories))


# -- synthetic streams ------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    iterations: int = 400
    antigens_per_iteration: int = 10
    iteration_period: float = 1.0
    normal_types: Tuple[str, ...] = ("web", "dns", "mail")
    anomalous_type: str = "scan"
    anomaly_fraction: float = 0.2
    anomalous_share: float = 0.5  # share of antigens inside the window that are anomalous
    baseline: Tuple[Tuple[float, float], ...] = ((0.0, 0.1), (0.0, 0.5), (0.5, 1.5))
    attack: Tuple[Tuple[float, float], ...] = ((0.5, 1.0), (1.5, 2.5), (0.0, 0.2))
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0 or self.antigens_per_iteration < 0:
            raise ValueError("iterations and antigens_per_iteration must be non-negative")
        if not 0.0 <= self.anomaly_fraction <= 1.0:
            raise ValueError("anomaly_fraction must lie in [0, 1]")
        if not 0.0 <= self.anomalous_share <= 1.0:
            raise ValueError("anomalous_share must lie in [0, 1]")
        if not self.normal_types:
            raise ValueError("at least one normal antigen type is required")
        if not self.iteration_period > 0:
            raise ValueError("iteration_period must be positive")
        if len(self.baseline) != len(self.attack):
            raise ValueError("baseline and attack need one range per category")

    @property
    def window(self) -> Tuple[int, int]:
        """Iterations ``[start, stop)`` of the planted anomaly, centred in the stream."""
        width = int(round(self.iterations * self.anomaly_fraction))
        start = (self.iterations - width) // 2
        return start, start + width


@dataclass(frozen=True)
class Label:
    antigen_id: str
    antigen_type: str
    anomalous: bool


def _draw(rng: np.random.Generator, ranges) -> List[float]:
    return [round(float(rng.uniform(lo, hi)), 6) for lo, hi in ranges]


def synthesize(cfg: SyntheticConfig) -> Tuple[List[DataInstance], List[Label]]:
    """A baseline regime with one window of high danger carrying the anomalous type."""
    rng = np.random.default_rng(cfg.seed)
    start, stop = cfg.window
    out: List[DataInstance] = []
    labels: List[Label] = []
    serial = 0
    step = cfg.iteration_period / (cfg.antigens_per_iteration + 1)
    for k in range(cfg.iterations):
        t0 = k * cfg.iteration_period
        attack = start <= k < stop
        out.append(DataInstance.make_signal(round(t0, 6), _draw(rng, cfg.attack if attack else cfg.baseline)))
        for j in range(cfg.antigens_per_iteration):
            bad = attack and rng.random() < cfg.anomalous_share
            atype = cfg.anomalous_type if bad else cfg.normal_types[int(rng.integers(len(cfg.normal_types)))]
            aid = f"a{serial}"
            serial += 1
            out.append(DataInstance.make_antigen(round(t0 + (j + 1) * step, 6), atype, aid))
            labels.append(Label(aid, atype, bool(bad)))
    return out, labels


def stream_header(cfg: SyntheticConfig, categories: Sequence[str] = DEFAULT_CATEGORIES) -> dict:
    return {HEADER_KEY: "synthetic", "seed": cfg.seed, "categories": list(categories),
            "iterations": cfg.iterations, "anomalous_type": cfg.anomalous_type}


def write_stream(fh: TextIO, instances: Iterable[DataInstance], header: Optional[dict] = None) -> None:
    if header is not None:
        fh.write(json.dumps(header) + "\n")
    for inst in instances:
        fh.write(json.dumps(instance_to_record(inst)) + "\n")


def write_labels(fh: TextIO, labels: Iterable[Label]) -> None:
    for lab in labels:
        fh.write(json.dumps({"id": lab.antigen_id, "type": lab.antigen_type, "anomalous": lab.anomalous}) + "\n")
