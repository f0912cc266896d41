"""Classic Duration Calculus over sampled traces."""

from .parser import (
    SpecBundle,
    format_formula,
    format_state,
    format_term,
    load_bundled_spec,
    load_spec,
    parse_formula,
    parse_state,
    parse_term,
)
from .semantics import (
    DEFAULT_TOLERANCE,
    Valuation,
    eval_formula,
    eval_state,
    eval_term,
    first_violation,
    integrate,
    truth_table,
)
from .syntax import *  # noqa: F401,F403
from .trace import Interval, Observable, TimedTrace, load_trace, read_trace, read_traces, write_trace

format = format_formula  # noqa: A001
