"""A population of cells clocked by iterations.

Every cell sees every signal; antigens are shared out among the cells.
Cells may be updated concurrently inside one iteration, but presentations
are always merged in cell-index order so runs replay exactly.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .. import analysis
from ..errors import InputError
from .cell import Cell, CellConfig, DataInstance, Kind, Presentation, classify

logger = logging.getLogger(__name__)


class SamplingPolicy(enum.Enum):
    ROUND_ROBIN = "round_robin"
    RANDOM = "random"


@dataclass(frozen=True)
class PopulationConfig:
    cell_count: int = 10
    cell_config: CellConfig = field(default_factory=CellConfig)
    iteration_period: float = 1.0
    sampling: SamplingPolicy = SamplingPolicy.ROUND_ROBIN
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.cell_count < 1:
            raise ValueError("cell_count must be at least 1")
        if not self.iteration_period > 0:
            raise ValueError("iteration_period must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(self, "sampling", SamplingPolicy(self.sampling))


@dataclass(frozen=True)
class IterationBatch:
    signal: DataInstance
    antigens: Tuple[DataInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "antigens", tuple(self.antigens))

    def validate(self) -> None:
        if classify(self.signal) is not Kind.SIGNAL:
            raise InputError(f"batch at t={self.signal.timestamp} does not start with a signal")
        for a in self.antigens:
            if classify(a) is not Kind.ANTIGEN:
                raise InputError(f"batch at t={self.signal.timestamp} holds more than one signal")


def batches(instances: Iterable[DataInstance]) -> Iterator[IterationBatch]:
    """Group a flat instance stream: each signal opens a batch.

    Antigens seen before the first signal are carried into the first batch.
    """
    signal: Optional[DataInstance] = None
    pending: List[DataInstance] = []
    for inst in instances:
        if classify(inst) is Kind.SIGNAL:
            if signal is not None:
                yield IterationBatch(signal, tuple(pending))
                pending = []
            signal = inst
        else:
            pending.append(inst)
    if signal is not None:
        yield IterationBatch(signal, tuple(pending))
    elif pending:
        logger.warning("dropping %d antigens: stream has no signal", len(pending))


class Population:
    def __init__(self, config: PopulationConfig,
                 observer_factory: Optional[Callable[[int], Sequence[Callable[[str], None]]]] = None):
        self.config = config
        root = np.random.SeedSequence(config.seed)
        cell_seeds = root.spawn(config.cell_count + 1)
        self.rng = np.random.default_rng(cell_seeds[-1])
        self.cells: List[Cell] = []
        for i in range(config.cell_count):
            observers = list(observer_factory(i)) if observer_factory else []
            self.cells.append(Cell(config.cell_config, np.random.default_rng(cell_seeds[i]), cell_id=i, observers=observers))
        self.iterations = 0
        self._next_cell = 0
        self._pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self) -> "Population":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def assign(self, antigens: Sequence[DataInstance]) -> List[List[DataInstance]]:
        """Share antigens among cells according to the sampling policy."""
        shares: List[List[DataInstance]] = [[] for _ in self.cells]
        n = len(self.cells)
        if self.config.sampling is SamplingPolicy.ROUND_ROBIN:
            for a in antigens:
                shares[self._next_cell].append(a)
                self._next_cell = (self._next_cell + 1) % n
        else:
            for a, k in zip(antigens, self.rng.integers(0, n, size=len(antigens))):
                shares[int(k)].append(a)
        return shares

    def step(self, batch: IterationBatch) -> List[Presentation]:
        batch.validate()
        shares = self.assign(batch.antigens)
        jobs = list(zip(self.cells, shares))
        if self._pool is None:
            results = [cell.run_iteration(batch.signal, share) for cell, share in jobs]
        else:
            results = list(self._pool.map(lambda job: job[0].run_iteration(batch.signal, job[1]), jobs))
        self.iterations += 1
        return [p for p in results if p is not None]

    def iter_run(self, stream: Iterable[IterationBatch]) -> Iterator[List[Presentation]]:
        """Step through the stream, yielding each iteration's presentations."""
        for batch in stream:
            yield self.step(batch)

    def run(self, stream: Iterable[IterationBatch], log: Optional["analysis.PresentationLog"] = None) -> "analysis.PresentationLog":
        log = analysis.PresentationLog() if log is None else log
        for out in self.iter_run(stream):
            log.extend(out)
            log.iterations += 1
        return log
