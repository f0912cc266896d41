"""Surface syntax for Duration Calculus: parser, printer and spec files.

Formula grammar, loosest binding first::

    formula  ::= quant | chop
    quant    ::= ("forall" | "exists") NAME ["in" "{" num {"," num} "}"] ":" formula
    chop     ::= implies [";" chop]
    implies  ::= or ["=>" implies]
    or       ::= and {"|" and}
    and      ::= unary {"&" unary}
    unary    ::= ("!" | "[]" | "<>") unary | atom
    atom     ::= "true" | "point" | "ae" "(" state ")" | quant
               | "(" formula ")" | term REL term | NAME_OF_FORMULA
    term     ::= mul {("+" | "-") mul}
    mul      ::= neg {("*" | "/") neg}
    neg      ::= "-" NUMBER | "-" neg | "len" | "int" "(" state ")" | NUMBER
               | ("min" | "max") "(" term {"," term} ")" | NAME | "(" term ")"
    state    ::= sor ["=>" state]
    sor      ::= sand {"|" sand}
    sand     ::= snot {"&" snot}
    snot     ::= "!" snot | "0" | "1" | NAME ["=" ["-"] NUMBER] | "(" state ")"

REL is one of ``= != < <= > >=``.  ``--`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from ..errors import DeclarationError, ParseError
from .semantics import Valuation
from .syntax import (
    AlmostEverywhere,
    And,
    Apply,
    Box,
    Chop,
    Diamond,
    Duration,
    Exists,
    ForAll,
    Formula,
    GlobalVar,
    Implies,
    Length,
    Not,
    Num,
    Or,
    Point,
    Pred,
    RELATIONS,
    SAnd,
    SConst,
    SImplies,
    SNot,
    SOr,
    StateAssertion,
    Term,
    TrueF,
    Var,
    is_terminating,
)
from .trace import Observable

KEYWORDS = {"true", "point", "ae", "int", "len", "min", "max", "forall", "exists", "in"}
STATEMENT_KEYWORDS = {"observable", "var", "domain", "formula", "check"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>:=|=>|<=|>=|!=|\[\]|<>|[;!&|=<>+\-*/(){},:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "name", "op", "eof"
    text: str
    line: int
    col: int
    first_on_line: bool = False


def tokenize(text: str) -> List[Token]:
    out: List[Token] = []
    pos, line, col = 0, 1, 1
    fresh = True
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col, fresh = line + 1, 1, True
        elif kind in ("ws", "comment"):
            col += len(s)
        else:
            out.append(Token(kind, s, line, col, fresh))
            fresh = False
            col += len(s)
        pos = m.end()
    out.append(Token("eof", "", line, col, True))
    return out


class _Parser:
    def __init__(
        self,
        tokens: Sequence[Token],
        observables: Optional[Set[str]] = None,
        global_names: Optional[Set[str]] = None,
        named: Optional[Mapping[str, Formula]] = None,
    ):
        self.toks = list(tokens)
        if self.toks[-1].kind != "eof":
            last = self.toks[-1]
            self.toks.append(Token("eof", "", last.line, last.col + len(last.text)))
        self.i = 0
        self.observables = observables
        self.global_names = global_names
        self.named = dict(named or {})
        self.bound: List[str] = []

    # -- helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("op", "name") and t.text in texts

    def error(self, msg: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(f"{msg}, found {found}", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> Token:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            raise self.error("expected a name")
        self.i += 1
        return t

    def number(self) -> Fraction:
        neg = False
        if self.at("-"):
            neg = True
            self.i += 1
        t = self.tok
        if t.kind != "num":
            raise self.error("expected a number")
        self.i += 1
        q = Fraction(t.text)
        return -q if neg else q

    def end(self) -> None:
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input")

    # -- formulas

    def formula(self) -> Formula:
        if self.at("forall", "exists"):
            return self.quant()
        return self.chop()

    def quant(self) -> Formula:
        kw = self.tok.text
        self.i += 1
        var = self.name().text
        domain = None
        if self.at("in"):
            self.i += 1
            self.expect("{")
            vals = [self.number()]
            while self.at(","):
                self.i += 1
                vals.append(self.number())
            self.expect("}")
            domain = tuple(vals)
        self.expect(":")
        self.bound.append(var)
        try:
            body = self.formula()
        finally:
            self.bound.pop()
        cls = ForAll if kw == "forall" else Exists
        return cls(var, domain, body)

    def chop(self) -> Formula:
        left = self.implies()
        if self.at(";"):
            self.i += 1
            return Chop(left, self.chop())
        return left

    def implies(self) -> Formula:
        left = self.or_()
        if self.at("=>"):
            self.i += 1
            return Implies(left, self.implies())
        return left

    def or_(self) -> Formula:
        out = self.and_()
        while self.at("|"):
            self.i += 1
            out = Or(out, self.and_())
        return out

    def and_(self) -> Formula:
        out = self.unary()
        while self.at("&"):
            self.i += 1
            out = And(out, self.unary())
        return out

    def unary(self) -> Formula:
        if self.at("!"):
            self.i += 1
            return Not(self.unary())
        if self.at("[]"):
            self.i += 1
            return Box(self.unary())
        if self.at("<>"):
            self.i += 1
            return Diamond(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        t = self.tok
        if self.at("true"):
            self.i += 1
            return TrueF()
        if self.at("point"):
            self.i += 1
            return Point()
        if self.at("ae"):
            self.i += 1
            self.expect("(")
            p = self.state()
            self.expect(")")
            return AlmostEverywhere(p)
        if self.at("forall", "exists"):
            return self.quant()
        if t.kind == "name" and t.text in self.named and t.text not in self.bound:
            nxt = self.peek()
            if not (nxt.kind == "op" and (nxt.text in RELATIONS or nxt.text in "+-*/")):
                self.i += 1
                return self.named[t.text]
        if self.at("("):
            start = self.i
            try:
                return self.pred()
            except (ParseError, DeclarationError) as pred_err:
                pred_pos = self.i
                self.i = start
                try:
                    self.expect("(")
                    f = self.formula()
                    self.expect(")")
                    return f
                except ParseError as f_err:
                    raise (pred_err if pred_pos > self.i else f_err) from None
        return self.pred()

    def pred(self) -> Formula:
        left = self.term()
        t = self.tok
        if not (t.kind == "op" and t.text in RELATIONS):
            raise self.error("expected a relation")
        self.i += 1
        return Pred(t.text, left, self.term())

    # -- terms

    def term(self) -> Term:
        out = self.mul()
        while self.at("+", "-"):
            fn = self.tok.text
            self.i += 1
            out = Apply(fn, (out, self.mul()))
        return out

    def mul(self) -> Term:
        out = self.neg()
        while self.at("*", "/"):
            fn = self.tok.text
            self.i += 1
            out = Apply(fn, (out, self.neg()))
        return out

    def neg(self) -> Term:
        if self.at("-"):
            if self.peek().kind == "num":
                self.i += 2
                return Num(-Fraction(self.toks[self.i - 1].text))
            self.i += 1
            return Apply("-", (self.neg(),))
        return self.term_atom()

    def term_atom(self) -> Term:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(Fraction(t.text))
        if self.at("len"):
            self.i += 1
            return Length()
        if self.at("int"):
            self.i += 1
            self.expect("(")
            p = self.state()
            self.expect(")")
            return Duration(p)
        if self.at("min", "max"):
            self.i += 1
            self.expect("(")
            args = [self.term()]
            while self.at(","):
                self.i += 1
                args.append(self.term())
            self.expect(")")
            return Apply(t.text, tuple(args))
        if self.at("("):
            self.i += 1
            th = self.term()
            self.expect(")")
            return th
        if t.kind == "name" and t.text not in KEYWORDS:
            self.i += 1
            if self.global_names is not None and t.text not in self.global_names and t.text not in self.bound:
                raise DeclarationError(f"undeclared variable {t.text!r} (line {t.line}, column {t.col})")
            return GlobalVar(t.text)
        raise self.error("expected a term")

    # -- state assertions

    def state(self) -> StateAssertion:
        left = self.sor()
        if self.at("=>"):
            self.i += 1
            return SImplies(left, self.state())
        return left

    def sor(self) -> StateAssertion:
        out = self.sand()
        while self.at("|"):
            self.i += 1
            out = SOr(out, self.sand())
        return out

    def sand(self) -> StateAssertion:
        out = self.snot()
        while self.at("&"):
            self.i += 1
            out = SAnd(out, self.snot())
        return out

    def snot(self) -> StateAssertion:
        t = self.tok
        if self.at("!"):
            self.i += 1
            return SNot(self.snot())
        if t.kind == "num" and t.text in ("0", "1"):
            self.i += 1
            return SConst(t.text == "1")
        if self.at("("):
            self.i += 1
            p = self.state()
            self.expect(")")
            return p
        if t.kind == "name" and t.text not in KEYWORDS:
            self.i += 1
            if self.observables is not None and t.text not in self.observables:
                raise DeclarationError(f"undeclared observable {t.text!r} (line {t.line}, column {t.col})")
            if self.at("="):
                self.i += 1
                q = self.number()
                if q.denominator != 1:
                    raise self.error("observable values are integers")
                return Var(t.text, int(q))
            return Var(t.text, 1)
        raise self.error("expected a state assertion")


def parse_formula(
    text: str,
    observables: Optional[Set[str]] = None,
    global_names: Optional[Set[str]] = None,
) -> Formula:
    """Parse formula text.  With name sets given, undeclared names are errors."""
    p = _Parser(tokenize(text), observables, global_names)
    f = p.formula()
    p.end()
    return f


def parse_term(text: str, global_names: Optional[Set[str]] = None) -> Term:
    p = _Parser(tokenize(text), None, global_names)
    th = p.term()
    p.end()
    return th


def parse_state(text: str, observables: Optional[Set[str]] = None) -> StateAssertion:
    p = _Parser(tokenize(text), observables)
    s = p.state()
    p.end()
    return s


# -- printing ---------------------------------------------------------------


def format_number(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    if not is_terminating(q):
        raise ValueError(f"{q} has no finite decimal form")
    k = 0
    while (q * 10**k).denominator != 1:
        k += 1
    n = abs((q * 10**k).numerator)
    digits = str(n).rjust(k + 1, "0")
    s = digits[:-k] + "." + digits[-k:]
    return ("-" if q < 0 else "") + s


_STATE_PREC = {SImplies: 1, SOr: 2, SAnd: 3, SNot: 4}


def format_state(p: StateAssertion) -> str:
    return _fmt_state(p, 0)


def _fmt_state(p: StateAssertion, ctx: int) -> str:
    prec = _STATE_PREC.get(type(p), 5)
    if isinstance(p, SConst):
        s = "1" if p.value else "0"
    elif isinstance(p, Var):
        s = p.name if p.value == 1 else f"{p.name} = {p.value}"
    elif isinstance(p, SNot):
        s = "!" + _fmt_state(p.arg, 4)
    elif isinstance(p, SAnd):
        s = f"{_fmt_state(p.left, 3)} & {_fmt_state(p.right, 3.5)}"
    elif isinstance(p, SOr):
        s = f"{_fmt_state(p.left, 2)} | {_fmt_state(p.right, 2.5)}"
    elif isinstance(p, SImplies):
        s = f"{_fmt_state(p.left, 1.5)} => {_fmt_state(p.right, 1)}"
    else:
        raise TypeError(p)
    return f"({s})" if prec < ctx else s


def format_term(th: Term) -> str:
    return _fmt_term(th, 0)


def _fmt_term(th: Term, ctx: float) -> str:
    if isinstance(th, Num):
        s = format_number(th.value)
        prec = 3 if th.value < 0 else 4
    elif isinstance(th, GlobalVar):
        s, prec = th.name, 4
    elif isinstance(th, Length):
        s, prec = "len", 4
    elif isinstance(th, Duration):
        s, prec = f"int({format_state(th.state)})", 4
    elif isinstance(th, Apply):
        if th.fn in ("min", "max"):
            s, prec = f"{th.fn}({', '.join(_fmt_term(a, 0) for a in th.args)})", 4
        elif len(th.args) == 1:
            (a,) = th.args
            inner = _fmt_term(a, 3.5)
            if isinstance(a, Num) and not inner.startswith("("):
                inner = f"({inner})"
            s, prec = "-" + inner, 3
        else:
            prec = 1 if th.fn in "+-" else 2
            s = f"{_fmt_term(th.args[0], prec)} {th.fn} {_fmt_term(th.args[1], prec + 0.5)}"
    else:
        raise TypeError(th)
    return f"({s})" if prec < ctx else s


def format_formula(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, ctx: float) -> str:
    if isinstance(f, (ForAll, Exists)):
        kw = "forall" if isinstance(f, ForAll) else "exists"
        dom = "" if f.domain is None else " in {" + ", ".join(format_number(d) for d in f.domain) + "}"
        s, prec = f"{kw} {f.var}{dom}: {_fmt(f.body, 0)}", 0
    elif isinstance(f, Chop):
        s, prec = f"{_fmt(f.left, 1.5)} ; {_fmt(f.right, 1)}", 1
    elif isinstance(f, Implies):
        s, prec = f"{_fmt(f.left, 2.5)} => {_fmt(f.right, 2)}", 2
    elif isinstance(f, Or):
        s, prec = f"{_fmt(f.left, 3)} | {_fmt(f.right, 3.5)}", 3
    elif isinstance(f, And):
        s, prec = f"{_fmt(f.left, 4)} & {_fmt(f.right, 4.5)}", 4
    elif isinstance(f, (Not, Box, Diamond)):
        op = {Not: "!", Box: "[]", Diamond: "<>"}[type(f)]
        s, prec = op + _fmt(f.arg, 5), 5
    elif isinstance(f, TrueF):
        s, prec = "true", 6
    elif isinstance(f, Point):
        s, prec = "point", 6
    elif isinstance(f, AlmostEverywhere):
        s, prec = f"ae({format_state(f.state)})", 6
    elif isinstance(f, Pred):
        s = f"{format_term(f.left)} {f.rel} {format_term(f.right)}"
        prec = 4.9  # bare under binary connectives, parenthesised under prefix operators
    else:
        raise TypeError(f)
    if isinstance(f, (ForAll, Exists)) and ctx > 0:
        return f"({s})"
    return f"({s})" if prec < ctx else s


# -- spec files -------------------------------------------------------------


@dataclass
class SpecBundle:
    """A loaded ``.dcspec``: schema, valuation and named formulas."""

    schema: Tuple[Observable, ...] = ()
    valuation: Valuation = field(default_factory=Valuation)
    formulas: Dict[str, Formula] = field(default_factory=dict)
    checks: List[str] = field(default_factory=list)
    variables: Tuple[str, ...] = ()

    @property
    def observable_names(self) -> Set[str]:
        return {o.name for o in self.schema}


def _statements(tokens: List[Token]) -> List[List[Token]]:
    stmts: List[List[Token]] = []
    for t in tokens:
        if t.kind == "eof":
            break
        if t.first_on_line and t.col == 1:
            stmts.append([t])
        elif not stmts:
            raise ParseError("statement must start in column 1", t.line, t.col)
        else:
            stmts[-1].append(t)
    return stmts


def load_spec(source: Union[str, Path]) -> SpecBundle:
    """Load a spec from text (or a ``Path``)."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    bundle = SpecBundle()
    observables: Dict[str, Observable] = {}
    bindings: Dict[str, Fraction] = {}
    declared_vars: List[str] = []
    domains: Dict[str, Tuple[Fraction, ...]] = {}
    checks: List[str] = []
    taken: Set[str] = set()

    def claim(tok: Token) -> None:
        if tok.text in taken:
            raise DeclarationError(f"duplicate name {tok.text!r} (line {tok.line}, column {tok.col})")
        taken.add(tok.text)

    for stmt in _statements(tokenize(text)):
        head = stmt[0]
        p = _Parser(stmt[1:], set(observables), set(declared_vars) | set(domains), bundle.formulas)
        if head.kind != "name" or head.text not in STATEMENT_KEYWORDS:
            raise ParseError(f"unknown statement {head.text!r}", head.line, head.col)
        kw = head.text
        if kw == "observable":
            while True:
                t = p.name()
                claim(t)
                dom = (0, 1)
                if p.at("in"):
                    p.i += 1
                    p.expect("{")
                    vals = [p.number()]
                    while p.at(","):
                        p.i += 1
                        vals.append(p.number())
                    p.expect("}")
                    dom = tuple(int(v) for v in vals)
                observables[t.text] = Observable(t.text, dom)
                if not p.at(","):
                    break
                p.i += 1
        elif kw == "var":
            while True:
                t = p.name()
                claim(t)
                declared_vars.append(t.text)
                if p.at("="):
                    p.i += 1
                    bindings[t.text] = p.number()
                if not p.at(","):
                    break
                p.i += 1
        elif kw == "domain":
            t = p.name()
            claim(t)
            p.expect("in")
            p.expect("{")
            vals = [p.number()]
            while p.at(","):
                p.i += 1
                vals.append(p.number())
            p.expect("}")
            domains[t.text] = tuple(vals)
        elif kw == "formula":
            t = p.name()
            claim(t)
            p.expect(":=")
            bundle.formulas[t.text] = p.formula()
        elif kw == "check":
            while True:
                t = p.name()
                if t.text not in bundle.formulas:
                    raise DeclarationError(f"check of unknown formula {t.text!r} (line {t.line}, column {t.col})")
                checks.append(t.text)
                if not p.at(","):
                    break
                p.i += 1
        p.end()

    bundle.schema = tuple(observables.values())
    bundle.valuation = Valuation(bindings, domains)
    bundle.checks = checks or list(bundle.formulas)
    bundle.variables = tuple(declared_vars)
    return bundle


def bundled_spec_text() -> str:
    return resources.files("dcadc.dc").joinpath("data/paper.dcspec").read_text(encoding="utf-8")


def load_bundled_spec() -> SpecBundle:
    return load_spec(bundled_spec_text())
