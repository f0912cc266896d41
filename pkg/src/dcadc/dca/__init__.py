from __future__ import annotations

from .cell import (
    DEFAULT_CATEGORIES,
    Cell,
    CellConfig,
    DataInstance,
    Kind,
    Presentation,
    State,
    StoredAntigen,
    classify,
)
from .population import IterationBatch, Population, PopulationConfig, SamplingPolicy, batches
from .stream import (
    Label,
    SyntheticConfig,
    read_csv,
    read_jsonl,
    read_stream,
    synthesize,
    write_labels,
    write_stream,
)
