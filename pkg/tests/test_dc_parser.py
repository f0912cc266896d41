from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dcadc.dc import (
    And,
    Apply,
    Chop,
    Duration,
    GlobalVar,
    Length,
    Num,
    Var,
    ae,
    format_formula,
    format_term,
    load_spec,
    parse_formula,
    parse_state,
    parse_term,
)
from dcadc.dc.syntax import Box, Implies, Not, Pred, SAnd, SNot, TrueF
from dcadc.errors import DeclarationError, ParseError

from oracle import random_formula, random_trace

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_requirement_parses_to_expected_tree():
    f = parse_formula("[](len >= 11 => int(I) + int(M) <= b)")
    expected = Box(Implies(
        Pred(">=", Length(), Num(11)),
        Pred("<=", Apply("+", (Duration(Var("I")), Duration(Var("M")))), GlobalVar("b")),
    ))
    assert f == expected
    assert format_formula(f) == "[](len >= 11 => int(I) + int(M) <= b)"


def test_simple_productions():
    assert parse_formula("ae(I)") == ae(Var("I"))
    assert parse_formula("ae(E1) ; ae(E2 & !E3)") == Chop(ae("E1"), ae(SAnd(Var("E2"), SNot(Var("E3")))))
    assert format_formula(TrueF()) == "true"


def test_precedence_fixtures():
    assert parse_formula("ae(a) & ae(b) ; ae(c)") == Chop(And(ae("a"), ae("b")), ae("c"))
    assert parse_formula("ae(a) ; ae(b) ; ae(c)") == Chop(ae("a"), Chop(ae("b"), ae("c")))
    assert parse_formula("!ae(a) & ae(b)") == And(Not(ae("a")), ae("b"))
    assert parse_term("1 - 2 - 3") == Apply("-", (Apply("-", (Num(1), Num(2))), Num(3)))
    assert parse_term("-2") == Num(-2)
    assert parse_term("-x") == Apply("-", (GlobalVar("x"),))


def test_chop_prints_right_nested_without_parentheses():
    f = Chop(ae("a"), Chop(ae("b"), ae("c")))
    assert format_formula(f) == "ae(a) ; ae(b) ; ae(c)"
    g = Chop(Chop(ae("a"), ae("b")), ae("c"))
    assert format_formula(g) == "(ae(a) ; ae(b)) ; ae(c)"


def test_nested_negation_never_prints_a_comment():
    t = Apply("-", (Apply("-", (GlobalVar("x"),)),))
    text = format_term(t)
    assert "--" not in text
    assert parse_term(text) == t
    n = Apply("-", (Num(-3),))
    assert parse_term(format_term(n)) == n


def test_state_parsing_with_values():
    assert parse_state("x = 2 & !y") == SAnd(Var("x", 2), SNot(Var("y")))


@pytest.mark.parametrize("text", ["ae(I", "int(I) <", "[]", "ae(I) ;", "1 + ", "forall x in {1,2} ae(I)"])
def test_syntax_errors_carry_positions(text):
    with pytest.raises(ParseError) as info:
        parse_formula(text)
    assert info.value.line == 1 and info.value.column >= 1


def test_error_position_on_later_line():
    with pytest.raises(ParseError) as info:
        parse_formula("ae(I)\n  & ae(M) &")
    assert info.value.line == 2


def test_undeclared_identifiers():
    with pytest.raises(DeclarationError):
        parse_formula("ae(Z)", observables={"I"})
    with pytest.raises(DeclarationError):
        parse_formula("len <= q", global_names={"b"})


def test_bundled_spec_contents(bundle):
    for name in ("F1", "F2", "Req", "Des1", "Des2", "EncI", "EncM", "ImmatureWork", "OfflineDeadline"):
        assert name in bundle.formulas
    assert [o.name for o in bundle.schema] == ["I", "M", "E1", "E2", "E3", "E4", "E5"]
    assert bundle.valuation.lookup("b") == 10


def test_bundled_formulas_round_trip(bundle):
    for f in bundle.formulas.values():
        assert parse_formula(format_formula(f)) == f


def test_load_spec_edge_cases():
    empty = load_spec("")
    assert empty.formulas == {} and empty.schema == ()
    with pytest.raises(DeclarationError):
        load_spec("observable I\nformula F := ae(J)\n")
    with pytest.raises(DeclarationError):
        load_spec("observable I\nvar I = 1\n")
    with pytest.raises(ParseError):
        load_spec("  observable I\n")  # statements start in column 1


def test_spec_with_domains_and_references():
    spec = load_spec(
        "observable S in {0, 1, 2}\n"
        "var k = 1.5\n"
        "domain x in {1, 2}\n"
        "formula A := ae(S = 2)\n"
        "formula B := A ; forall x: len >= x - k\n"
        "    | point\n"
        "check B\n"
    )
    assert spec.checks == ["B"]
    assert spec.valuation.lookup("k") == Fraction(3, 2)
    assert isinstance(spec.formulas["B"], Chop)
    assert spec.formulas["B"].left == spec.formulas["A"]


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_round_trip_on_generated_formulas(seed):
    rng = random.Random(seed)
    tr = random_trace(rng, multi_valued=True)
    f = random_formula(rng, tr.schema, 6, globals_=("b", "r"), division=True)
    assert parse_formula(format_formula(f)) == f


def test_named_formula_inside_parentheses():
    spec = load_spec(
        "observable I\n"
        "var r = 5\n"
        "formula Busy := ae(I)\n"
        "formula Bound := [](Busy => len <= r)\n"
    )
    assert spec.formulas["Bound"].arg.left == spec.formulas["Busy"]
    with pytest.raises(DeclarationError):
        load_spec("observable I\nformula F := (Nope => len <= 1)\n")
