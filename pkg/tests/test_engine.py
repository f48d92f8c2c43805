import random
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from opsl.engine import (
    UNDEFINED, BindingError, Engine, EngineError, QuantifierNotSupported, check_full_obs, degree_of,
    degree_parts, eval_history, eval_term, prob_of,
)
from opsl.logic import Valuation, parse, parse_path, parse_term
from opsl.model import CIRCLE, EPSILON, MemorylessStrategy, Observation, UndefinedObservableError, build_model

from oracles import random_model, random_profile

F_STOLEN = parse_path("F stolen")


def _nu(profile):
    return Valuation().extend("x", profile["1"]).extend("y", profile["2"])


def test_intercept_probabilities(intercept, intercept_profile):
    assert prob_of(intercept, "s0", F_STOLEN, intercept_profile) == Fraction(1, 5)
    assert prob_of(intercept, "s0", parse_path("F warning"), intercept_profile) == Fraction(1, 10)
    assert prob_of(intercept, "s0", parse_path("X init"), intercept_profile) == 0


def test_intercept_degree_per_agent(intercept, intercept_profile):
    assert degree_parts(intercept, "s0", "1", F_STOLEN, intercept_profile) == (Fraction(1, 10), Fraction(1, 5))
    assert degree_of(intercept, "s0", "2", F_STOLEN, intercept_profile) == 1


def test_degree_of_false_is_undefined(intercept, intercept_profile):
    assert degree_of(intercept, "s0", "1", parse_path("stolen and not stolen"), intercept_profile) is UNDEFINED
    assert not UNDEFINED


def test_undefined_makes_comparisons_false(intercept, intercept_profile):
    nu = _nu(intercept_profile)
    zero = "D[1:x,2:y][1](X init)"
    assert eval_term(intercept, "s0", parse_term(zero), nu) is UNDEFINED
    for op in ("<", "=", ">"):
        assert not eval_history(intercept, "s0", parse(f"{zero} {op} 1/2"), nu)
    assert not eval_history(intercept, "s0", parse("P[1:x,2:y](X init)^-1 > 0"), nu)
    # negating the comparison flips it to true
    assert eval_history(intercept, "s0", parse(f"not ({zero} = 1/2)"), nu)


def test_degree_on_zero_option(intercept, intercept_profile):
    nu = _nu(intercept_profile)
    eng = Engine(intercept, degree_on_zero=1)
    assert eng.term("s0", parse_term("D[1:x,2:y][1](X init)"), nu) == 1
    assert eng.holds("s0", parse("D[1:x,2:y][1](X init) = 1"), nu)


def test_arithmetic_terms(intercept, intercept_profile):
    nu = _nu(intercept_profile)
    t = parse_term("P[1:x,2:y](F stolen)^-1 * D[1:x,2:y][1](F stolen) + 1/2")
    assert eval_term(intercept, "s0", t, nu) == 3
    assert eval_history(intercept, "s0", parse("P[1:x,2:y](F stolen) = 1/5"), nu)


def test_exists_is_refused(intercept):
    with pytest.raises(QuantifierNotSupported):
        eval_history(intercept, "s0", parse("exists x. P[all:x](F stolen) > 0"))


def test_partial_binding_is_refused(intercept, intercept_profile):
    nu = _nu(intercept_profile)
    with pytest.raises(BindingError):
        eval_term(intercept, "s0", parse_term("P[1:x](F stolen)"), nu)


def test_unknown_agent(intercept, intercept_profile):
    with pytest.raises(EngineError):
        eval_term(intercept, "s0", parse_term("D[1:x,2:y][7](F stolen)"), _nu(intercept_profile))
    with pytest.raises(EngineError):
        check_full_obs(intercept, "s0", "7", F_STOLEN)


def test_engine_stats_and_caches(intercept, intercept_profile):
    eng = Engine(intercept)
    nu = _nu(intercept_profile)
    eng.holds("s0", parse("D[1:x,2:y][1](F stolen) = 1/2"), nu)
    eng.holds("s0", parse("obs[1](F stolen)"), nu)
    assert {"product_states", "degree_dsa_states", "obs_graph_vertices"} <= set(eng.stats)
    assert eng.dra(F_STOLEN) is eng.dra(F_STOLEN)


def test_nested_history_formula(intercept, intercept_profile):
    nu = _nu(intercept_profile)
    # at s1 the attacker copies with probability 1/2 and nothing changes afterwards
    inner = "P[1:x,2:y](G init) = 0"
    assert eval_history(intercept, "s0", parse(f"P[1:x,2:y](X hist({inner})) = 1"), nu)


# -- D against the two extreme observers --------------------------------------

def _blind(model):
    joints = model.joint_actions
    return Observation({s: CIRCLE for s in model.states}, {j: EPSILON for j in joints})


def _some_path_avoids(model, s, prop):
    g = nx.DiGraph()
    for t in model.states:
        if prop in model.labels[t]:
            continue
        g.add_node(t)
        for j in model.joint_actions:
            for t2 in model.successors(t, j):
                if prop not in model.labels[t2]:
                    g.add_edge(t, t2)
    if s not in g:
        return False
    # every state has a successor, so an infinite path exists iff a cycle is reachable
    sub = g.subgraph(nx.descendants(g, s) | {s})
    return any(len(c) > 1 or sub.has_edge(next(iter(c)), next(iter(c)))
               for c in nx.strongly_connected_components(sub))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_degree_for_blind_and_perfect_observers(seed):
    rng = random.Random(seed)
    m = random_model(rng, n_states=rng.randint(2, 4))
    phi = parse_path("F p")
    first = m.agents[0]
    blind = build_model(m.agents, m.states, m.actions, m.transition, m.labels,
                        {**{a: m.obs[a] for a in m.agents[1:]}, first: _blind(m)})
    perfect = build_model(m.agents, m.states, m.actions, m.transition, m.labels)
    # strategies are keyed by observables, so each variant gets its own profile
    profile = random_profile(rng, perfect)
    if prob_of(perfect, "s0", phi, profile) > 0:
        assert degree_of(perfect, "s0", first, phi, profile) == 1
    profile = random_profile(rng, blind)
    if prob_of(blind, "s0", phi, profile) == 0:
        assert degree_of(blind, "s0", first, phi, profile) is UNDEFINED
        return
    expected = 0 if _some_path_avoids(m, "s0", "p") else 1
    assert degree_of(blind, "s0", first, phi, profile) == expected
    assert check_full_obs(blind, "s0", first, phi) == (expected == 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_degree_is_a_probability_ratio(seed):
    rng = random.Random(seed)
    m = random_model(rng, n_states=rng.randint(2, 4))
    profile = random_profile(rng, m)
    phi = parse_path(rng.choice(["F p", "G q", "p U q", "X p"]))
    for agent in m.agents:
        num, den = degree_parts(m, "s0", agent, phi, profile)
        assert 0 <= num <= den <= 1


def test_strategy_missing_observable_raises(intercept):
    partial = MemorylessStrategy({"init": {"send": 1}})
    nu = Valuation().extend("x", partial).extend("y", partial)
    with pytest.raises(UndefinedObservableError):
        eval_term(intercept, "s0", parse_term("P[1:x,2:y](F stolen)"), nu)
