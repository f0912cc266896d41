from __future__ import annotations

from fractions import Fraction

import pytest

from dcadc.dc import TimedTrace, load_bundled_spec
from dcadc.instrument import SCHEMA


def build_fig2() -> TimedTrace:
    """Unit-duration lifespan: E1, E2, E1, E3, E4 while immature, then E5."""
    zero = {o.name: 0 for o in SCHEMA}
    steps = [("E1", "I"), ("E2", "I"), ("E1", "I"), ("E3", "I"), ("E4", "I"), ("E5", "M")]
    segs = tuple((t, {**zero, ev: 1, st: 1}) for t, (ev, st) in enumerate(steps))
    return TimedTrace(SCHEMA, 6, segs, Fraction(1))


@pytest.fixture
def fig2() -> TimedTrace:
    return build_fig2()


@pytest.fixture(scope="session")
def bundle():
    return load_bundled_spec()
