"""Reference evaluator and random generators for the test suite.

The evaluator is deliberately naive: per-tick sums for durations and an
exhaustive search over chop points, with every derived operator given its
own direct definition instead of reusing the library's expansions.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from dcadc.dc.syntax import (
    AlmostEverywhere,
    And,
    Apply,
    Box,
    Chop,
    Diamond,
    Duration,
    Exists,
    ForAll,
    GlobalVar,
    Implies,
    Length,
    Not,
    Num,
    Or,
    Point,
    Pred,
    SAnd,
    SConst,
    SImplies,
    SNot,
    SOr,
    TrueF,
    Var,
)
from dcadc.dc.trace import Observable, TimedTrace

TOL = Fraction(1, 10**9)


# -- oracle -----------------------------------------------------------------


def tick_values(trace: TimedTrace) -> List[Dict[str, int]]:
    """One valuation per tick, by walking the change points by hand."""
    out: List[Dict[str, int]] = []
    segs = list(trace.segments)
    for k, (start, val) in enumerate(segs):
        end = segs[k + 1][0] if k + 1 < len(segs) else trace.horizon
        out.extend(dict(val) for _ in range(end - start))
    assert len(out) == trace.horizon
    return out


def state_at(p, val: Mapping[str, int]) -> bool:
    if isinstance(p, SConst):
        return bool(p.value)
    if isinstance(p, Var):
        return val[p.name] == p.value
    if isinstance(p, SNot):
        return not state_at(p.arg, val)
    if isinstance(p, SAnd):
        return state_at(p.left, val) and state_at(p.right, val)
    if isinstance(p, SOr):
        return state_at(p.left, val) or state_at(p.right, val)
    if isinstance(p, SImplies):
        return (not state_at(p.left, val)) or state_at(p.right, val)
    raise TypeError(p)


def riemann(trace: TimedTrace, p, b: int, e: int) -> int:
    ticks = tick_values(trace)
    return sum(1 for t in range(b, e) if state_at(p, ticks[t]))


def compare(rel: str, x: Fraction, y: Fraction) -> bool:
    d = x - y
    return {
        "=": abs(d) <= TOL,
        "!=": abs(d) > TOL,
        "<": d < -TOL,
        "<=": d <= TOL,
        ">": d > TOL,
        ">=": d >= -TOL,
    }[rel]


class Oracle:
    def __init__(self, trace: TimedTrace, bindings: Optional[Mapping[str, Fraction]] = None,
                 domains: Optional[Mapping[str, Sequence[Fraction]]] = None):
        self.trace = trace
        self.ticks = tick_values(trace)
        self.q = trace.tick_seconds
        self.bindings = dict(bindings or {})
        self.domains = dict(domains or {})
        self._memo: Dict[tuple, bool] = {}

    def term(self, th, env: Mapping[str, Fraction], b: int, e: int) -> Fraction:
        if isinstance(th, Num):
            return th.value
        if isinstance(th, GlobalVar):
            return env[th.name] if th.name in env else self.bindings[th.name]
        if isinstance(th, Length):
            return (e - b) * self.q
        if isinstance(th, Duration):
            return sum(1 for t in range(b, e) if state_at(th.state, self.ticks[t])) * self.q
        if isinstance(th, Apply):
            xs = [self.term(a, env, b, e) for a in th.args]
            if th.fn == "+":
                return xs[0] + xs[1]
            if th.fn == "-":
                return -xs[0] if len(xs) == 1 else xs[0] - xs[1]
            if th.fn == "*":
                return xs[0] * xs[1]
            if th.fn == "/":
                return xs[0] / xs[1]
            if th.fn == "min":
                return min(xs)
            if th.fn == "max":
                return max(xs)
        raise TypeError(th)

    def holds(self, f, b: int, e: int, env: Optional[Mapping[str, Fraction]] = None) -> bool:
        env = dict(env or {})
        return self._holds(f, b, e, tuple(sorted(env.items())))

    def _holds(self, f, b: int, e: int, env: Tuple[Tuple[str, Fraction], ...]) -> bool:
        key = (f, b, e, env)
        if key not in self._memo:
            self._memo[key] = self._compute(f, b, e, env)
        return self._memo[key]

    def _compute(self, f, b: int, e: int, env: Tuple[Tuple[str, Fraction], ...]) -> bool:
        envd = dict(env)
        h = self._holds
        if isinstance(f, Pred):
            return compare(f.rel, self.term(f.left, envd, b, e), self.term(f.right, envd, b, e))
        if isinstance(f, TrueF):
            return True
        if isinstance(f, Point):
            return b == e
        if isinstance(f, Not):
            return not h(f.arg, b, e, env)
        if isinstance(f, And):
            return h(f.left, b, e, env) and h(f.right, b, e, env)
        if isinstance(f, Or):
            return h(f.left, b, e, env) or h(f.right, b, e, env)
        if isinstance(f, Implies):
            return (not h(f.left, b, e, env)) or h(f.right, b, e, env)
        if isinstance(f, AlmostEverywhere):
            return e > b and all(state_at(f.state, self.ticks[t]) for t in range(b, e))
        if isinstance(f, Chop):
            return any(h(f.left, b, m, env) and h(f.right, m, e, env) for m in range(b, e + 1))
        if isinstance(f, Box):
            return all(h(f.arg, i, j, env) for i in range(b, e + 1) for j in range(i, e + 1))
        if isinstance(f, Diamond):
            return any(h(f.arg, i, j, env) for i in range(b, e + 1) for j in range(i, e + 1))
        if isinstance(f, (ForAll, Exists)):
            dom = f.domain if f.domain is not None else self.domains[f.var]
            results = (h(f.body, b, e, tuple(sorted({**envd, f.var: d}.items()))) for d in dom)
            return all(results) if isinstance(f, ForAll) else any(results)
        raise TypeError(f)


# -- generators -------------------------------------------------------------


NAMES = ("P", "Q", "R", "S")


def random_trace(rng: random.Random, max_ticks: int = 20, max_obs: int = 4,
                 tick_seconds: Fraction = Fraction(1), multi_valued: bool = False) -> TimedTrace:
    n_obs = rng.randint(1, max_obs)
    schema = []
    for name in NAMES[:n_obs]:
        dom = (0, 1, 2) if multi_valued and rng.random() < 0.3 else (0, 1)
        schema.append(Observable(name, dom))
    horizon = rng.randint(0, max_ticks)
    segs = []
    for t in range(horizon):
        if t == 0 or rng.random() < 0.35:
            segs.append((t, {o.name: rng.choice(o.domain) for o in schema}))
    return TimedTrace(tuple(schema), horizon, tuple(segs), tick_seconds)


def random_state(rng: random.Random, schema: Sequence[Observable], depth: int):
    if depth <= 0 or rng.random() < 0.35:
        if rng.random() < 0.1:
            return SConst(rng.random() < 0.5)
        o = rng.choice(schema)
        return Var(o.name, rng.choice(o.domain) if len(o.domain) > 2 else 1)
    kind = rng.choice(("not", "and", "or", "implies"))
    if kind == "not":
        return SNot(random_state(rng, schema, depth - 1))
    cls = {"and": SAnd, "or": SOr, "implies": SImplies}[kind]
    return cls(random_state(rng, schema, depth - 1), random_state(rng, schema, depth - 1))


def random_number(rng: random.Random, allow_negative: bool = True) -> Fraction:
    q = Fraction(rng.randint(0, 40), rng.choice((1, 2, 4, 10)))
    return -q if allow_negative and rng.random() < 0.15 else q


def random_term(rng: random.Random, schema, depth: int, globals_: Sequence[str] = (), division: bool = False):
    if depth <= 0 or rng.random() < 0.4:
        r = rng.random()
        if r < 0.3:
            return Num(random_number(rng))
        if r < 0.5:
            return Length()
        if r < 0.6 and globals_:
            return GlobalVar(rng.choice(globals_))
        return Duration(random_state(rng, schema, 2))
    fns = ["+", "-", "*", "neg", "min", "max"] + (["/"] if division else [])
    fn = rng.choice(fns)
    sub = lambda: random_term(rng, schema, depth - 1, globals_, division)  # noqa: E731
    if fn == "neg":
        return Apply("-", (sub(),))
    if fn in ("min", "max"):
        return Apply(fn, tuple(sub() for _ in range(rng.randint(1, 3))))
    return Apply(fn, (sub(), sub()))


def random_formula(rng: random.Random, schema, depth: int, globals_: Sequence[str] = (),
                   division: bool = False, quantifiers: bool = True):
    """A random formula of nesting depth at most ``depth``."""
    if depth <= 1 or rng.random() < 0.2:
        r = rng.random()
        if r < 0.1:
            return TrueF()
        if r < 0.15:
            return Point()
        if r < 0.45:
            return AlmostEverywhere(random_state(rng, schema, 2))
        rel = rng.choice(("=", "!=", "<", "<=", ">", ">="))
        return Pred(rel, random_term(rng, schema, 2, globals_, division), random_term(rng, schema, 2, globals_, division))
    kinds = ["not", "and", "or", "implies", "chop", "box", "diamond"]
    if quantifiers:
        kinds += ["forall", "exists"]
    kind = rng.choice(kinds)
    sub = lambda g=globals_: random_formula(rng, schema, depth - 1, g, division, quantifiers)  # noqa: E731
    if kind == "not":
        return Not(sub())
    if kind == "box":
        return Box(sub())
    if kind == "diamond":
        return Diamond(sub())
    if kind in ("forall", "exists"):
        var = rng.choice(("x", "y"))
        dom = tuple(sorted({random_number(rng) for _ in range(rng.randint(1, 3))}))
        body = sub(tuple(set(globals_) | {var}))
        return (ForAll if kind == "forall" else Exists)(var, dom, body)
    cls = {"and": And, "or": Or, "implies": Implies, "chop": Chop}[kind]
    return cls(sub(), sub())


def formula_depth(f) -> int:
    children = [v for v in vars(f).values() if hasattr(v, "derived")]
    return 1 + max((formula_depth(c) for c in children), default=0)
