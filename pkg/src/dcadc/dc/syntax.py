"""Abstract syntax of classic Duration Calculus.

Three layers: state assertions (Boolean over observables at a time point),
terms (real values of an interval) and formulas (truth values of an
interval).  Derived connectives are kept as their own nodes so that the
pretty printer can reproduce them, and each exposes ``expand()`` giving its
definition in core constructors.  Evaluation always goes through ``expand``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple, Union

Number = Union[int, float, str, Fraction]

RELATIONS = ("=", "!=", "<", "<=", ">", ">=")
BINARY_FUNCTIONS = ("+", "-", "*", "/")
VARIADIC_FUNCTIONS = ("min", "max")


def to_fraction(value: Number) -> Fraction:
    """Exact rational from a number; floats are read as their decimal repr."""
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"non-finite number {value!r}")
        return Fraction(repr(value))
    return Fraction(str(value))


def is_terminating(q: Fraction) -> bool:
    d = q.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


# -- state assertions -------------------------------------------------------


class StateAssertion:
    __slots__ = ()

    def expand(self) -> "StateAssertion":
        return self

    def observables(self) -> set:
        out: set = set()
        _collect_observables(self, out)
        return out

    def __str__(self) -> str:
        from .parser import format_state

        return format_state(self)


@dataclass(frozen=True)
class SConst(StateAssertion):
    value: bool


@dataclass(frozen=True)
class Var(StateAssertion):
    """``X = d``; a bare Boolean observable is ``Var(X, 1)``."""

    name: str
    value: int = 1


@dataclass(frozen=True)
class SNot(StateAssertion):
    arg: StateAssertion


@dataclass(frozen=True)
class SAnd(StateAssertion):
    left: StateAssertion
    right: StateAssertion


@dataclass(frozen=True)
class SOr(StateAssertion):
    left: StateAssertion
    right: StateAssertion

    def expand(self) -> StateAssertion:
        return SNot(SAnd(SNot(self.left), SNot(self.right)))


@dataclass(frozen=True)
class SImplies(StateAssertion):
    left: StateAssertion
    right: StateAssertion

    def expand(self) -> StateAssertion:
        return SNot(SAnd(self.left, SNot(self.right)))


def _collect_observables(p: StateAssertion, out: set) -> None:
    if isinstance(p, Var):
        out.add(p.name)
    elif isinstance(p, SNot):
        _collect_observables(p.arg, out)
    elif isinstance(p, (SAnd, SOr, SImplies)):
        _collect_observables(p.left, out)
        _collect_observables(p.right, out)


# -- terms ------------------------------------------------------------------


class Term:
    __slots__ = ()

    def __add__(self, other: "Term") -> "Term":
        return Apply("+", (self, _term(other)))

    def __radd__(self, other) -> "Term":
        return Apply("+", (_term(other), self))

    def __sub__(self, other: "Term") -> "Term":
        return Apply("-", (self, _term(other)))

    def __rsub__(self, other) -> "Term":
        return Apply("-", (_term(other), self))

    def __mul__(self, other: "Term") -> "Term":
        return Apply("*", (self, _term(other)))

    def __rmul__(self, other) -> "Term":
        return Apply("*", (_term(other), self))

    def __truediv__(self, other: "Term") -> "Term":
        return Apply("/", (self, _term(other)))

    def __neg__(self) -> "Term":
        return Apply("-", (self,))

    def __str__(self) -> str:
        from .parser import format_term

        return format_term(self)


def _term(x) -> Term:
    return x if isinstance(x, Term) else Num(x)


@dataclass(frozen=True)
class Num(Term):
    value: Fraction

    def __post_init__(self):
        q = to_fraction(self.value)
        if not is_terminating(q):
            raise ValueError(f"literal constant {q} has no finite decimal form")
        object.__setattr__(self, "value", q)


@dataclass(frozen=True)
class GlobalVar(Term):
    name: str


@dataclass(frozen=True)
class Length(Term):
    pass


@dataclass(frozen=True)
class Duration(Term):
    """``int(P)``: accumulated time during which P holds."""

    state: StateAssertion


@dataclass(frozen=True)
class Apply(Term):
    fn: str
    args: Tuple[Term, ...]

    def __post_init__(self):
        args = tuple(self.args)
        object.__setattr__(self, "args", args)
        if self.fn in BINARY_FUNCTIONS:
            ok = len(args) == 2 or (self.fn == "-" and len(args) == 1)
        elif self.fn in VARIADIC_FUNCTIONS:
            ok = len(args) >= 1
        else:
            raise ValueError(f"unknown function {self.fn!r}")
        if not ok:
            raise ValueError(f"wrong arity {len(args)} for {self.fn!r}")


# -- formulas ---------------------------------------------------------------


class Formula:
    __slots__ = ()

    derived = False

    def expand(self) -> "Formula":
        return self

    def __str__(self) -> str:
        from .parser import format_formula

        return format_formula(self)


@dataclass(frozen=True)
class Pred(Formula):
    rel: str
    left: Term
    right: Term

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class ForAll(Formula):
    """Quantification over a finite domain.

    ``domain=None`` defers to the valuation's declared quantifier domain.
    """

    var: str
    domain: Optional[Tuple[Fraction, ...]]
    body: Formula

    def __post_init__(self):
        if self.domain is not None:
            object.__setattr__(self, "domain", tuple(to_fraction(d) for d in self.domain))


@dataclass(frozen=True)
class Chop(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class TrueF(Formula):
    derived = True

    def expand(self) -> Formula:
        return Pred(">=", Length(), Num(0))


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula
    derived = True

    def expand(self) -> Formula:
        return Not(And(Not(self.left), Not(self.right)))


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula
    derived = True

    def expand(self) -> Formula:
        return Not(And(self.left, Not(self.right)))


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    domain: Optional[Tuple[Fraction, ...]]
    body: Formula
    derived = True

    def __post_init__(self):
        if self.domain is not None:
            object.__setattr__(self, "domain", tuple(to_fraction(d) for d in self.domain))

    def expand(self) -> Formula:
        return Not(ForAll(self.var, self.domain, Not(self.body)))


@dataclass(frozen=True)
class AlmostEverywhere(Formula):
    """``ae(P)``: P holds on the whole of a non-point interval."""

    state: StateAssertion
    derived = True

    def expand(self) -> Formula:
        return And(Pred("=", Duration(self.state), Length()), Pred(">", Length(), Num(0)))


@dataclass(frozen=True)
class Point(Formula):
    derived = True

    def expand(self) -> Formula:
        return Pred("=", Length(), Num(0))


@dataclass(frozen=True)
class Box(Formula):
    arg: Formula
    derived = True

    def expand(self) -> Formula:
        return Not(Chop(TrueF(), Chop(Not(self.arg), TrueF())))


@dataclass(frozen=True)
class Diamond(Formula):
    arg: Formula
    derived = True

    def expand(self) -> Formula:
        return Chop(TrueF(), Chop(self.arg, TrueF()))


# -- builders ---------------------------------------------------------------


def obs(name: str, value: int = 1) -> Var:
    return Var(name, value)


def dur(p: Union[StateAssertion, str]) -> Duration:
    return Duration(Var(p) if isinstance(p, str) else p)


def ae(p: Union[StateAssertion, str]) -> AlmostEverywhere:
    return AlmostEverywhere(Var(p) if isinstance(p, str) else p)


def chop(*fs: Formula) -> Formula:
    """Right-nested chop of one or more formulas."""
    if not fs:
        raise ValueError("chop of nothing")
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Chop(f, out)
    return out


def sor(*ps: StateAssertion) -> StateAssertion:
    out = ps[0]
    for p in ps[1:]:
        out = SOr(out, p)
    return out


def conj(*fs: Formula) -> Formula:
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def pred(lhs, rel: str, rhs) -> Pred:
    return Pred(rel, _term(lhs), _term(rhs))


def global_vars(node) -> set:
    """Free global variable names of a term or formula."""
    out: set = set()
    _collect_globals(node, out, frozenset())
    return out


def _collect_globals(node, out: set, bound: frozenset) -> None:
    if isinstance(node, GlobalVar):
        if node.name not in bound:
            out.add(node.name)
    elif isinstance(node, Apply):
        for a in node.args:
            _collect_globals(a, out, bound)
    elif isinstance(node, Pred):
        _collect_globals(node.left, out, bound)
        _collect_globals(node.right, out, bound)
    elif isinstance(node, (Not, Box, Diamond)):
        _collect_globals(node.arg, out, bound)
    elif isinstance(node, (And, Or, Implies, Chop)):
        _collect_globals(node.left, out, bound)
        _collect_globals(node.right, out, bound)
    elif isinstance(node, (ForAll, Exists)):
        _collect_globals(node.body, out, bound | {node.var})


def formula_observables(node) -> set:
    """Observable names referenced anywhere in a term or formula."""
    out: set = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, StateAssertion):
            out |= n.observables()
        elif isinstance(n, (Duration, AlmostEverywhere)):
            out |= n.state.observables()
        elif isinstance(n, Apply):
            stack.extend(n.args)
        elif isinstance(n, Pred):
            stack.extend((n.left, n.right))
        elif isinstance(n, (Not, Box, Diamond)):
            stack.append(n.arg)
        elif isinstance(n, (And, Or, Implies, Chop)):
            stack.extend((n.left, n.right))
        elif isinstance(n, (ForAll, Exists)):
            stack.append(n.body)
    return out
