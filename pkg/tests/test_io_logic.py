import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from opsl.io import format_fraction, load_model, model_from_dict, model_hash, model_to_dict, parse_prob
from opsl.logic import (
    Atom, Binding, Compare, Const, Degree, Exists, FullObs, Lift, Not, Or, ParseError, PNot, Prob,
    SortError, Top, Until, Valuation, free_vars, is_propositional, is_sentence, max_state_subformulas,
    parse, parse_path, parse_term, pretty,
)
from opsl.model import MemorylessStrategy

from conftest import EXAMPLES
from oracles import random_ltl, random_model


# -- io -----------------------------------------------------------------------

@pytest.mark.parametrize("raw, expected", [
    ("1/10", Fraction(1, 10)), ("0.25", Fraction(1, 4)), (1, Fraction(1)), (0.1, Fraction(1, 10)),
])
def test_parse_prob(raw, expected):
    assert parse_prob(raw) == expected


def test_parse_prob_rejects_bool():
    with pytest.raises(ValueError):
        parse_prob(True)


def test_model_dict_round_trip(intercept):
    again = model_from_dict(json.loads(json.dumps(model_to_dict(intercept))))
    assert model_to_dict(again) == model_to_dict(intercept)
    assert model_hash(again) == model_hash(intercept)


def test_packaged_copy_matches_example():
    from importlib import resources
    packaged = json.loads(resources.files("opsl").joinpath("data/intercept.pomas.json").read_text("utf-8"))
    assert model_to_dict(model_from_dict(packaged)) == model_to_dict(load_model(EXAMPLES / "intercept.pomas.json"))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_models_round_trip(seed):
    m = random_model(random.Random(seed))
    assert model_to_dict(model_from_dict(model_to_dict(m))) == model_to_dict(m)


def test_format_fraction():
    assert format_fraction(Fraction(2, 4)) == "1/2"
    assert format_fraction(Fraction(3)) == "3/1"


# -- parsing ------------------------------------------------------------------

def test_parse_degree_sentence():
    phi = parse("D[1:x,2:y][1](F stolen) = 1/2")
    assert isinstance(phi, Compare) and phi.op == "="
    assert isinstance(phi.left, Degree) and phi.left.agent == "1"
    assert phi.left.binding == Binding((("1", "x"), ("2", "y")))
    assert phi.right == Const(Fraction(1, 2))
    assert free_vars(phi) == {"x", "y"}


def test_parse_quantified_sentence():
    phi = parse("exists x. P[all:x](F p) > 1/2")
    assert isinstance(phi, Exists) and is_sentence(phi)
    assert phi.body.left.binding.default == "x"


def test_derived_comparisons_desugar():
    ge = parse("P[all:x](F p) >= 1/2")
    assert not isinstance(ge, Compare)
    assert free_vars(ge) == {"x"}


def test_obs_and_connectives():
    phi = parse("obs[1](F stolen) and not init")
    assert any(isinstance(n, FullObs) for n in _walk(phi))


def _walk(phi):
    yield phi
    for child in getattr(phi, "__dict__", {}).values():
        if hasattr(child, "__dataclass_fields__"):
            yield from _walk(child)


def test_unicode_operators():
    assert parse("¬ p ∨ q") == parse("not p or q")


@pytest.mark.parametrize("text, line, col", [
    ("P[all:x](F p", 1, 13),
    ("p or\n  )", 2, 3),
])
def test_parse_error_position(text, line, col):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert (err.value.line, err.value.column) == (line, col)


def test_temporal_outside_path_is_sort_error():
    with pytest.raises(SortError):
        parse("F p")


def test_atoms_not_allowed_in_terms():
    with pytest.raises(SortError):
        parse("p + 1 > 0")


def test_max_state_subformulas_order_and_dedup():
    phi = parse_path("p U (q or X p)")
    assert max_state_subformulas(phi) == (Atom("p"), Atom("q"))
    nested = parse_path("F hist(P[all:x](F p) > 1/2)")
    (h,) = max_state_subformulas(nested)
    assert isinstance(h, Compare)
    assert not is_propositional(h)
    assert is_propositional(Not(Or(Atom("a"), Top())))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000))
def test_pretty_parse_round_trip_path(seed):
    phi = random_ltl(random.Random(seed), 4)
    assert parse_path(pretty(phi)) == phi


@pytest.mark.parametrize("text", [
    "exists x. P[all:x](F p) > 1/2",
    "D[1:x,2:y][1](F stolen) = 1/2",
    "obs[2](F stolen)",
    "P[all:x](p U q)^-1 * 2 < 3",
    "exists x. exists y. (P[1:x,2:y](G not p) + 1/4 > P[all:y](X q))",
])
def test_pretty_parse_round_trip_history(text):
    phi = parse(text)
    assert parse(pretty(phi)) == phi


def test_parse_term():
    t = parse_term("P[all:x](F p) + 1/4")
    assert free_vars(t) == {"x"}
    assert isinstance(parse_term("D[all:z][2](X p)"), Degree)
    assert isinstance(parse_term("P[1:a,2:b](F p)"), Prob)


def test_valuation_profile_and_unbound():
    s = MemorylessStrategy({"o": {"a": 1}})
    nu = Valuation().extend("x", s)
    assert nu.profile(Binding(default="x"), ["1", "2"]) == {"1": s, "2": s}
    with pytest.raises(KeyError):
        nu["y"]


def test_lift_and_pnot_structure():
    phi = parse_path("not (p U q)")
    assert phi == PNot(Until(Lift(Atom("p")), Lift(Atom("q"))))
