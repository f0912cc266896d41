"""Interval semantics of Duration Calculus over sampled traces.

Time is the integer tick grid of the trace; chop points range over tick
boundaries.  All values are exact rationals (in seconds, i.e. ticks times
``tick_seconds``).  Relations compare with an absolute tolerance, 1e-9 by
default; pass ``tolerance=0`` for strictly exact comparison.

Chop is evaluated by computing truth tables of both operands over every
subinterval of the chopped interval and composing them with a Boolean
matrix product.  Because of this, a division by zero inside a chopped
subformula is reported for any subinterval, not only the ones a
short-circuiting search would visit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from ..errors import DivisionByZeroError, EvaluationError, SchemaError, UnboundVariableError
from .syntax import (
    AlmostEverywhere,
    And,
    Apply,
    Chop,
    Duration,
    ForAll,
    Formula,
    GlobalVar,
    Length,
    Not,
    Num,
    Pred,
    SAnd,
    SConst,
    SNot,
    SOr,
    SImplies,
    StateAssertion,
    Term,
    Var,
    to_fraction,
)
from .trace import Interval, IntervalLike, TimedTrace, as_interval

DEFAULT_TOLERANCE = Fraction(1, 10**9)

_LIMIT = 2**62


@dataclass(frozen=True)
class Valuation:
    """Global variable bindings plus declared finite quantifier domains."""

    bindings: Mapping[str, Fraction] = field(default_factory=dict)
    quantifier_domains: Mapping[str, Tuple[Fraction, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bindings", {k: to_fraction(v) for k, v in self.bindings.items()})
        object.__setattr__(
            self,
            "quantifier_domains",
            {k: tuple(to_fraction(x) for x in vs) for k, vs in self.quantifier_domains.items()},
        )

    def bind(self, name: str, value) -> "Valuation":
        return Valuation({**self.bindings, name: value}, self.quantifier_domains)

    def update(self, values: Mapping[str, object]) -> "Valuation":
        return Valuation({**self.bindings, **values}, self.quantifier_domains)

    def lookup(self, name: str) -> Fraction:
        try:
            return self.bindings[name]
        except KeyError:
            raise UnboundVariableError(f"global variable {name!r} is not bound") from None

    def domain(self, name: str) -> Tuple[Fraction, ...]:
        try:
            return self.quantifier_domains[name]
        except KeyError:
            raise EvaluationError(f"no finite domain declared for quantified variable {name!r}") from None


EMPTY = Valuation()


# -- state assertions -------------------------------------------------------


def _state_holds(p: StateAssertion, val: Mapping[str, int]) -> bool:
    if isinstance(p, SConst):
        return bool(p.value)
    if isinstance(p, Var):
        return val[p.name] == p.value
    if isinstance(p, SNot):
        return not _state_holds(p.arg, val)
    if isinstance(p, SAnd):
        return _state_holds(p.left, val) and _state_holds(p.right, val)
    if isinstance(p, (SOr, SImplies)):
        return _state_holds(p.expand(), val)
    raise TypeError(f"not a state assertion: {p!r}")


def _state_ticks(trace: TimedTrace, p: StateAssertion) -> np.ndarray:
    if isinstance(p, SConst):
        return np.full(trace.horizon, bool(p.value))
    if isinstance(p, Var):
        return trace.ticks[p.name] == p.value
    if isinstance(p, SNot):
        return ~_state_ticks(trace, p.arg)
    if isinstance(p, SAnd):
        return _state_ticks(trace, p.left) & _state_ticks(trace, p.right)
    if isinstance(p, (SOr, SImplies)):
        return _state_ticks(trace, p.expand())
    raise TypeError(f"not a state assertion: {p!r}")


def check_state(trace: TimedTrace, p: StateAssertion) -> None:
    """Raise SchemaError if ``p`` mentions unknown observables or values."""
    if isinstance(p, Var):
        o = trace.observable(p.name)
        if p.value not in o.domain:
            raise SchemaError(f"value {p.value} outside domain of {p.name!r}")
    elif isinstance(p, SNot):
        check_state(trace, p.arg)
    elif isinstance(p, (SAnd, SOr, SImplies)):
        check_state(trace, p.left)
        check_state(trace, p.right)


def _states_in(node) -> Iterator[StateAssertion]:
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, (Duration, AlmostEverywhere)):
            yield n.state
        elif isinstance(n, Apply):
            stack.extend(n.args)
        elif isinstance(n, Pred):
            stack.extend((n.left, n.right))
        elif isinstance(n, (Formula, Term)):
            for v in vars(n).values():
                if isinstance(v, (Formula, Term)):
                    stack.append(v)


def check_formula(trace: TimedTrace, node) -> None:
    for p in _states_in(node):
        check_state(trace, p)


def eval_state(trace: TimedTrace, p: StateAssertion, t) -> bool:
    """Truth value of ``p`` at time point ``t`` (in ticks, ``0 <= t < horizon``)."""
    check_state(trace, p)
    return _state_holds(p, trace.valuation_at(t))


def integrate(trace: TimedTrace, p: StateAssertion, iv: IntervalLike) -> int:
    """Ticks within ``iv`` during which ``p`` holds (exact)."""
    iv = as_interval(iv)
    _check_window(trace, iv)
    check_state(trace, p)
    if iv.length == 0:
        return 0
    segs = trace.segments
    total = 0
    k = trace.segment_index(iv.b)
    while k < len(segs) and segs[k][0] < iv.e:
        s, val = segs[k]
        e = segs[k + 1][0] if k + 1 < len(segs) else trace.horizon
        if _state_holds(p, val):
            total += min(e, iv.e) - max(s, iv.b)
        k += 1
    return total


def _check_window(trace: TimedTrace, iv: Interval) -> None:
    if iv.e > trace.horizon:
        from ..errors import OutOfRangeError

        raise OutOfRangeError(f"interval [{iv.b}, {iv.e}] exceeds horizon {trace.horizon}")


# -- terms ------------------------------------------------------------------


def eval_term(trace: TimedTrace, th: Term, v: Valuation = EMPTY, iv: IntervalLike = None) -> Fraction:
    """Value of a term on an interval, in seconds."""
    iv = _default_iv(trace, iv)
    _check_window(trace, iv)
    return _term_scalar(trace, th, v, iv)


def _term_scalar(trace: TimedTrace, th: Term, v: Valuation, iv: Interval) -> Fraction:
    if isinstance(th, Num):
        return th.value
    if isinstance(th, GlobalVar):
        return v.lookup(th.name)
    if isinstance(th, Length):
        return iv.length * trace.tick_seconds
    if isinstance(th, Duration):
        return integrate(trace, th.state, iv) * trace.tick_seconds
    if isinstance(th, Apply):
        args = [_term_scalar(trace, a, v, iv) for a in th.args]
        if th.fn == "+":
            return args[0] + args[1]
        if th.fn == "-":
            return -args[0] if len(args) == 1 else args[0] - args[1]
        if th.fn == "*":
            return args[0] * args[1]
        if th.fn == "/":
            if args[1] == 0:
                raise DivisionByZeroError(f"division by zero in {th} on [{iv.b}, {iv.e}]")
            return args[0] / args[1]
        if th.fn == "min":
            return min(args)
        if th.fn == "max":
            return max(args)
    raise TypeError(f"not a term: {th!r}")


# -- exact rational tables --------------------------------------------------
#
# A table value is (num, den): num is a Python int or a numpy array (int64,
# or object holding ints/Fractions once magnitudes get large), den is a
# positive Python int shared by the whole table.


def _maxabs(x) -> int:
    if isinstance(x, np.ndarray):
        if x.size == 0:
            return 0
        if x.dtype == object:
            return int(math.ceil(max(abs(e) for e in x.flat)))
        return int(np.abs(x).max())
    return int(math.ceil(abs(x)))


def _widen(x):
    if isinstance(x, np.ndarray) and x.dtype != object:
        return x.astype(object)
    return x


def _guard(bound: int, *xs):
    if bound >= _LIMIT:
        return tuple(_widen(x) for x in xs)
    return xs


def _mul(a, b):
    a, b = _guard(_maxabs(a) * _maxabs(b), a, b)
    return a * b


def _add(a, b, sign=1):
    a, b = _guard(_maxabs(a) + _maxabs(b), a, b)
    return a + b if sign > 0 else a - b


def _rat_add(x, y, sign=1):
    (n1, d1), (n2, d2) = x, y
    d = d1 * d2 // math.gcd(d1, d2)
    return _add(_mul(n1, d // d1), _mul(n2, d // d2), sign), d


def _rat_common(x, y):
    (n1, d1), (n2, d2) = x, y
    d = d1 * d2 // math.gcd(d1, d2)
    return _mul(n1, d // d1), _mul(n2, d // d2), d


def _compare(rel: str, x, y, tol: Fraction):
    """Apply ``rel`` to rational values with absolute tolerance ``tol``."""
    n, d = _rat_add(x, y, -1)
    lhs = _mul(n, tol.denominator)
    bound = _mul(tol.numerator, d)
    if rel == "=":
        out = _mul(abs(n) if not isinstance(n, np.ndarray) else np.abs(n), tol.denominator) <= bound
    elif rel == "!=":
        out = _mul(abs(n) if not isinstance(n, np.ndarray) else np.abs(n), tol.denominator) > bound
    elif rel == "<":
        out = lhs < -bound
    elif rel == "<=":
        out = lhs <= bound
    elif rel == ">":
        out = lhs > bound
    elif rel == ">=":
        out = lhs >= -bound
    else:
        raise ValueError(rel)
    if isinstance(out, np.ndarray):
        return out.astype(bool)
    return bool(out)


def _frac(q: Fraction):
    return q.numerator, q.denominator


class _TableEvaluator:
    """Truth tables over every subinterval ``[b+i, b+j]`` of a window."""

    def __init__(self, trace: TimedTrace, window: Interval, v: Valuation, tol: Fraction, shared=None):
        self.trace = trace
        self.window = window
        self.v = v
        self.tol = tol
        self.memo: Dict[Formula, np.ndarray] = {}
        if shared is None:
            n = window.length + 1
            i = np.arange(n, dtype=np.int64)
            shared = {
                "I": i[:, None],
                "J": i[None, :],
                "mask": i[None, :] >= i[:, None],
                "prefix": {},
            }
        self.shared = shared
        self.mask = shared["mask"]

    def with_valuation(self, v: Valuation) -> "_TableEvaluator":
        return _TableEvaluator(self.trace, self.window, v, self.tol, self.shared)

    def _prefix(self, p: StateAssertion) -> np.ndarray:
        cache = self.shared["prefix"]
        if p not in cache:
            ticks = _state_ticks(self.trace, p)[self.window.b : self.window.e]
            cache[p] = np.concatenate(([0], np.cumsum(ticks, dtype=np.int64)))
        return cache[p]

    def term(self, th: Term):
        delta = self.trace.tick_seconds
        if isinstance(th, Num):
            return _frac(th.value)
        if isinstance(th, GlobalVar):
            return _frac(self.v.lookup(th.name))
        if isinstance(th, Length):
            ticks = self.shared["J"] - self.shared["I"]
            return _mul(ticks, delta.numerator), delta.denominator
        if isinstance(th, Duration):
            pre = self._prefix(th.state)
            ticks = pre[self.shared["J"]] - pre[self.shared["I"]]
            return _mul(ticks, delta.numerator), delta.denominator
        if isinstance(th, Apply):
            args = [self.term(a) for a in th.args]
            if th.fn == "+":
                return _rat_add(args[0], args[1])
            if th.fn == "-":
                if len(args) == 1:
                    return -args[0][0], args[0][1]
                return _rat_add(args[0], args[1], -1)
            if th.fn == "*":
                return _mul(args[0][0], args[1][0]), args[0][1] * args[1][1]
            if th.fn == "/":
                return self._divide(args[0], args[1], th)
            if th.fn in ("min", "max"):
                best = args[0]
                for other in args[1:]:
                    a, b, d = _rat_common(best, other)
                    pick = np.minimum if th.fn == "min" else np.maximum
                    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                        best = (pick(a, b), d)
                    else:
                        best = (min(a, b) if th.fn == "min" else max(a, b), d)
                return best
        raise TypeError(f"not a term: {th!r}")

    def _divide(self, x, y, th):
        (n1, d1), (n2, d2) = x, y
        if not isinstance(n2, np.ndarray):
            if n2 == 0:
                raise DivisionByZeroError(f"division by zero in {th}")
            sign = 1 if n2 > 0 else -1
            return _mul(n1, d2 * sign), d1 * abs(n2)
        zero = n2 == 0
        if bool(np.any(zero & self.mask)):
            raise DivisionByZeroError(f"division by zero in {th} on a subinterval of [{self.window.b}, {self.window.e}]")
        safe = np.where(zero, 1, n2)
        top = _widen(np.broadcast_to(_mul(n1, d2), safe.shape))
        bottom = _widen(_mul(safe, d1))
        return np.frompyfunc(Fraction, 2, 1)(top, bottom), 1

    def formula(self, f: Formula) -> np.ndarray:
        hit = self.memo.get(f)
        if hit is not None:
            return hit
        if f.derived:
            out = self.formula(f.expand())
        elif isinstance(f, Pred):
            res = _compare(f.rel, self.term(f.left), self.term(f.right), self.tol)
            out = np.broadcast_to(res, self.mask.shape) & self.mask
        elif isinstance(f, Not):
            out = ~self.formula(f.arg) & self.mask
        elif isinstance(f, And):
            out = self.formula(f.left) & self.formula(f.right)
        elif isinstance(f, ForAll):
            domain = f.domain if f.domain is not None else self.v.domain(f.var)
            out = self.mask.copy()
            for d in domain:
                out &= self.with_valuation(self.v.bind(f.var, d)).formula(f.body)
        elif isinstance(f, Chop):
            a = self.formula(f.left).astype(np.float64)
            b = self.formula(f.right).astype(np.float64)
            out = (a @ b) > 0.5
        else:
            raise TypeError(f"not a formula: {f!r}")
        self.memo[f] = out
        return out


# -- formulas ---------------------------------------------------------------


def _default_iv(trace: TimedTrace, iv) -> Interval:
    return Interval(0, trace.horizon) if iv is None else as_interval(iv)


def eval_formula(
    trace: TimedTrace,
    f: Formula,
    v: Valuation = EMPTY,
    iv: IntervalLike = None,
    tolerance=DEFAULT_TOLERANCE,
) -> bool:
    """Truth value of ``f`` on ``iv`` (default: the whole trace)."""
    iv = _default_iv(trace, iv)
    _check_window(trace, iv)
    check_formula(trace, f)
    return _formula_scalar(trace, f, v, iv, to_fraction(tolerance))


def _formula_scalar(trace: TimedTrace, f: Formula, v: Valuation, iv: Interval, tol: Fraction) -> bool:
    if f.derived:
        return _formula_scalar(trace, f.expand(), v, iv, tol)
    if isinstance(f, Pred):
        x = _frac(_term_scalar(trace, f.left, v, iv))
        y = _frac(_term_scalar(trace, f.right, v, iv))
        return _compare(f.rel, x, y, tol)
    if isinstance(f, Not):
        return not _formula_scalar(trace, f.arg, v, iv, tol)
    if isinstance(f, And):
        left = _formula_scalar(trace, f.left, v, iv, tol)
        right = _formula_scalar(trace, f.right, v, iv, tol)
        return left and right
    if isinstance(f, ForAll):
        domain = f.domain if f.domain is not None else v.domain(f.var)
        results = [_formula_scalar(trace, f.body, v.bind(f.var, d), iv, tol) for d in domain]
        return all(results)
    if isinstance(f, Chop):
        tables = _TableEvaluator(trace, iv, v, tol)
        a = tables.formula(f.left)
        b = tables.formula(f.right)
        return bool(np.any(a[0, :] & b[:, -1]))
    raise TypeError(f"not a formula: {f!r}")


def truth_table(
    trace: TimedTrace,
    f: Formula,
    v: Valuation = EMPTY,
    iv: IntervalLike = None,
    tolerance=DEFAULT_TOLERANCE,
) -> np.ndarray:
    """Boolean matrix ``T[i, j]`` = truth of ``f`` on ``[b+i, b+j]`` (False for i > j)."""
    iv = _default_iv(trace, iv)
    _check_window(trace, iv)
    check_formula(trace, f)
    return _TableEvaluator(trace, iv, v, to_fraction(tolerance)).formula(f).copy()


def first_violation(
    trace: TimedTrace,
    f: Formula,
    v: Valuation = EMPTY,
    iv: IntervalLike = None,
    tolerance=DEFAULT_TOLERANCE,
) -> Optional[Interval]:
    """Earliest-starting, then shortest, subinterval of ``iv`` where ``f`` is false."""
    iv = _default_iv(trace, iv)
    table = truth_table(trace, f, v, iv, tolerance)
    n = table.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool))
    bad = np.argwhere(upper & ~table)
    if bad.size == 0:
        return None
    i, j = bad[0]
    return Interval(iv.b + int(i), iv.b + int(j))
