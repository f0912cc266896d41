"""Engine configuration: one JSON document with a section per component.

Every key is optional; missing keys take the defaults shown by
``dcadc config --print-defaults``.  Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Union

from .analysis import ByCount, ByTime, SegmentationPolicy
from .dc.syntax import to_fraction
from .dca.cell import DEFAULT_CATEGORIES, CellConfig
from .dca.population import PopulationConfig
from .dca.stream import SyntheticConfig
from .errors import ConfigError
from .instrument import EventDurations


@dataclass
class PopulationSection:
    cell_count: int = 10
    sampling: str = "round_robin"
    workers: int = 1
    iteration_period: float = 1.0


@dataclass
class CellSection:
    weights_csm: List[float] = field(default_factory=lambda: [2.0, 1.0, 2.0])
    weights_k: List[float] = field(default_factory=lambda: [2.0, 1.0, -3.0])
    threshold_range: List[float] = field(default_factory=lambda: [5.0, 20.0])
    categories: List[str] = field(default_factory=lambda: list(DEFAULT_CATEGORIES))


@dataclass
class AnalysisSection:
    mode: str = "offline"
    by_count: Optional[int] = None
    by_time: Optional[float] = None
    tau: float = 0.5


@dataclass
class DurationSection:
    l1: Union[int, List[int]] = 1
    l2: Union[int, List[int]] = 1
    l3: Union[int, List[int]] = 1
    l4: Union[int, List[int]] = 1
    l5: Union[int, List[int]] = 1
    la: Union[int, List[int]] = 1
    tick_seconds: Union[int, float, str] = 1
    iteration_ticks: Optional[int] = None
    layout: str = "event"


@dataclass
class SimulationSection:
    iterations: int = 400
    antigens_per_iteration: int = 10
    normal_types: List[str] = field(default_factory=lambda: ["web", "dns", "mail"])
    anomalous_type: str = "scan"
    anomaly_fraction: float = 0.2
    anomalous_share: float = 0.5


SECTIONS = {
    "population": PopulationSection,
    "cell": CellSection,
    "analysis": AnalysisSection,
    "durations": DurationSection,
    "simulation": SimulationSection,
}


@dataclass
class EngineConfig:
    seed: int = 0
    input: Optional[str] = None
    output: Optional[str] = None
    population: PopulationSection = field(default_factory=PopulationSection)
    cell: CellSection = field(default_factory=CellSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    durations: DurationSection = field(default_factory=DurationSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        kwargs = {}
        for key, value in data.items():
            if key in SECTIONS:
                kwargs[key] = _section(SECTIONS[key], key, value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "EngineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def validate(self) -> None:
        """Build every component once so bad values surface at load time."""
        try:
            self.population_config()
            self.event_durations()
            self.synthetic_config()
            self.segmentation()
            if self.analysis.mode not in ("offline", "segmented"):
                raise ValueError(f"analysis.mode must be 'offline' or 'segmented', got {self.analysis.mode!r}")
            if not 0 <= self.analysis.tau <= 1:
                raise ValueError("analysis.tau must lie in [0, 1]")
            if self.durations.layout not in ("event", "wall"):
                raise ValueError("durations.layout must be 'event' or 'wall'")
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def cell_config(self) -> CellConfig:
        c = self.cell
        return CellConfig(tuple(c.weights_csm), tuple(c.weights_k), tuple(c.threshold_range), tuple(c.categories))

    def population_config(self) -> PopulationConfig:
        p = self.population
        return PopulationConfig(p.cell_count, self.cell_config(), p.iteration_period, p.sampling, self.seed, p.workers)

    def event_durations(self) -> EventDurations:
        d = self.durations
        vals = [tuple(x) if isinstance(x, list) else x for x in (d.l1, d.l2, d.l3, d.l4, d.l5, d.la)]
        return EventDurations(*vals, tick_seconds=to_fraction(d.tick_seconds))

    def segmentation(self) -> Optional[SegmentationPolicy]:
        a = self.analysis
        if a.by_count is not None and a.by_time is not None:
            raise ValueError("set at most one of analysis.by_count and analysis.by_time")
        if a.by_count is not None:
            return ByCount(int(a.by_count))
        if a.by_time is not None:
            return ByTime(float(a.by_time))
        return None

    def synthetic_config(self) -> SyntheticConfig:
        s = self.simulation
        return SyntheticConfig(
            iterations=s.iterations,
            antigens_per_iteration=s.antigens_per_iteration,
            iteration_period=self.population.iteration_period,
            normal_types=tuple(s.normal_types),
            anomalous_type=s.anomalous_type,
            anomaly_fraction=s.anomaly_fraction,
            anomalous_share=s.anomalous_share,
            seed=self.seed,
        )

    @property
    def tau(self) -> Fraction:
        return Fraction(str(self.analysis.tau))


def _section(cls, name: str, value):
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(value) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {unknown}")
    return cls(**value)
