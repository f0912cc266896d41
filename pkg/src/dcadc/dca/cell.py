"""Single dendritic cell: immature -> matured -> reinitialised.

Per iteration an immature cell handles one signal and any number of
antigens.  Every data instance goes through the data processing event (E1)
and then signal transformation (E2) or antigen sampling (E3); the iteration
ends with one temporal correlation (E4).  Once the costimulation total
reaches the migration threshold the cell matures, presents its antigens
with a context bit (E5) and is reinitialised.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import CellStateError, InputError

DEFAULT_CATEGORIES = ("pamp", "danger", "safe")


class Kind(enum.Enum):
    SIGNAL = "signal"
    ANTIGEN = "antigen"


@dataclass(frozen=True)
class DataInstance:
    timestamp: float
    signal: Optional[Tuple[float, ...]] = None
    antigen_type: Optional[str] = None
    antigen_id: Optional[str] = None

    @classmethod
    def make_signal(cls, timestamp: float, values: Sequence[float]) -> "DataInstance":
        return cls(timestamp, signal=tuple(float(x) for x in values))

    @classmethod
    def make_antigen(cls, timestamp: float, antigen_type: str, antigen_id: Optional[str] = None) -> "DataInstance":
        return cls(timestamp, antigen_type=antigen_type, antigen_id=antigen_id)


def classify(instance: DataInstance) -> Kind:
    """Data processing: tell signals from antigens."""
    has_signal = instance.signal is not None
    has_antigen = instance.antigen_type is not None
    if has_signal == has_antigen:
        raise InputError(f"instance at t={instance.timestamp} must carry exactly one of signal / antigen")
    if has_signal:
        if any(x < 0 for x in instance.signal):
            raise InputError(f"negative signal value at t={instance.timestamp}")
        return Kind.SIGNAL
    return Kind.ANTIGEN


class State(enum.Enum):
    IMMATURE = "immature"
    SEMI = "semi"
    FULL = "full"

    @property
    def matured(self) -> bool:
        return self is not State.IMMATURE


@dataclass(frozen=True)
class CellConfig:
    weights_csm: Tuple[float, ...] = (2.0, 1.0, 2.0)
    weights_k: Tuple[float, ...] = (2.0, 1.0, -3.0)
    threshold_range: Tuple[float, float] = (5.0, 20.0)
    categories: Tuple[str, ...] = DEFAULT_CATEGORIES

    def __post_init__(self):
        k = len(self.categories)
        if k < 1:
            raise ValueError("at least one signal category is required")
        if len(self.weights_csm) != k or len(self.weights_k) != k:
            raise ValueError(f"weight rows must have one entry per category ({k})")
        lo, hi = self.threshold_range
        if not (0 < lo <= hi):
            raise ValueError(f"threshold range must satisfy 0 < lo <= hi, got {self.threshold_range}")

    @property
    def weight_matrix(self) -> np.ndarray:
        return np.array([self.weights_csm, self.weights_k], dtype=float)


@dataclass
class StoredAntigen:
    antigen_type: str
    timestamp: float
    correlations: int = 0


@dataclass(frozen=True)
class Presentation:
    """Output of one matured cell: antigen types with one shared context bit."""

    time: float
    items: Tuple[Tuple[str, int], ...]
    signals: int
    antigens: int
    cell_id: int = 0

    @property
    def context(self) -> Optional[int]:
        return self.items[0][1] if self.items else None


Observer = Callable[[str], None]


@dataclass
class Cell:
    config: CellConfig
    rng: np.random.Generator
    cell_id: int = 0
    observers: List[Observer] = field(default_factory=list)
    state: State = State.IMMATURE
    csm: float = 0.0
    k_acc: float = 0.0
    antigen_store: List[StoredAntigen] = field(default_factory=list)
    threshold: float = 0.0
    signals_processed: int = 0
    antigens_sampled: int = 0
    correlations: int = 0
    last_signal_time: Optional[float] = None
    presented: bool = False

    def __post_init__(self):
        if self.threshold <= 0:
            self.threshold = self._draw_threshold()

    def _draw_threshold(self) -> float:
        lo, hi = self.config.threshold_range
        return lo if lo == hi else float(self.rng.uniform(lo, hi))

    def _emit(self, event: str) -> None:
        for obs in self.observers:
            obs(event)

    def _require_immature(self, op: str) -> None:
        if self.state.matured:
            raise CellStateError(f"{op} on a matured cell")

    def transform_signals(self, s: Sequence[float]) -> "Cell":
        self._require_immature("transform_signals")
        s = np.asarray(s, dtype=float)
        if s.shape != (len(self.config.categories),):
            raise InputError(f"signal has {s.size} values, expected {len(self.config.categories)}")
        dcsm, dk = self.config.weight_matrix @ s
        self.csm += float(dcsm)
        self.k_acc += float(dk)
        self.signals_processed += 1
        return self

    def sample_antigen(self, a: DataInstance) -> "Cell":
        self._require_immature("sample_antigen")
        if classify(a) is not Kind.ANTIGEN:
            raise InputError("sample_antigen needs an antigen instance")
        self.antigen_store.append(StoredAntigen(a.antigen_type, a.timestamp))
        self.antigens_sampled += 1
        return self

    def correlate(self) -> "Cell":
        """Mark stored antigens as seen alongside the signals processed so far."""
        self._require_immature("correlate")
        for stored in self.antigen_store:
            stored.correlations += 1
        self.correlations += 1
        return self

    def maybe_migrate(self) -> bool:
        self._require_immature("maybe_migrate")
        if self.csm >= self.threshold:
            self.state = State.SEMI if self.k_acc <= 0 else State.FULL
            return True
        return False

    def present(self, time: float = 0.0) -> Presentation:
        if not self.state.matured:
            raise CellStateError("present on an immature cell")
        if self.presented:
            raise CellStateError("cell already presented in this lifespan")
        bit = 1 if self.state is State.FULL else 0
        self.presented = True
        return Presentation(
            time=time,
            items=tuple((a.antigen_type, bit) for a in self.antigen_store),
            signals=self.signals_processed,
            antigens=self.antigens_sampled,
            cell_id=self.cell_id,
        )

    def reinitialise(self, rng: Optional[np.random.Generator] = None) -> "Cell":
        if rng is not None:
            self.rng = rng
        self.state = State.IMMATURE
        self.csm = 0.0
        self.k_acc = 0.0
        self.antigen_store = []
        self.signals_processed = 0
        self.antigens_sampled = 0
        self.correlations = 0
        self.presented = False
        self.threshold = self._draw_threshold()
        return self

    def run_iteration(self, signal: DataInstance, antigens: Sequence[DataInstance] = ()) -> Optional[Presentation]:
        """One iteration: the signal, its antigens, correlation, and maybe presentation."""
        if classify(signal) is not Kind.SIGNAL:
            raise InputError("an iteration starts with a signal instance")
        self._emit("iteration")
        for inst in (signal, *antigens):
            self._emit("E1")
            if classify(inst) is Kind.SIGNAL:
                if inst is not signal:
                    raise InputError("only one signal instance per iteration")
                self._emit("E2")
                self.transform_signals(inst.signal)
                self.last_signal_time = inst.timestamp
            else:
                self._emit("E3")
                self.sample_antigen(inst)
        self._emit("E4")
        self.correlate()
        if not self.maybe_migrate():
            return None
        self._emit("E5")
        out = self.present(signal.timestamp)
        self.reinitialise()
        return out
