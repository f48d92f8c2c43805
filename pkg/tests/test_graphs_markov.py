import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from opsl.graphs import has_cycle_through, reachable, tarjan_scc
from opsl.markov import (
    ProductChain, SingularSystemError, classify_tsccs, explore_chain, solve_linear, solve_reachability,
)

from oracles import scc_oracle

graphs = st.integers(1, 9).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=25))
)


@settings(max_examples=200, deadline=None)
@given(graphs)
def test_tarjan_matches_networkx(g):
    n, edges = g
    succ = {v: [w for u, w in edges if u == v] for v in range(n)}
    comps = tarjan_scc(range(n), lambda v: succ[v])
    assert {frozenset(c) for c in comps} == scc_oracle(range(n), lambda v: succ[v])
    # reverse topological order: no edge from an earlier component into a later one
    where = {v: k for k, c in enumerate(comps) for v in c}
    assert all(where[u] >= where[w] for u, w in edges)


def test_tarjan_deep_chain_is_iterative():
    n = 50_000
    comps = tarjan_scc([0], lambda v: [v + 1] if v + 1 < n else [])
    assert len(comps) == n and comps[0] == [n - 1]


def test_reachable_and_cycles():
    succ = {0: [1], 1: [2], 2: [1], 3: [3], 4: []}
    assert reachable([0], succ.__getitem__) == {0, 1, 2}
    assert has_cycle_through([1, 2], succ.__getitem__)
    assert has_cycle_through([3], succ.__getitem__)
    assert not has_cycle_through([4], succ.__getitem__)


# -- linear algebra -------------------------------------------------------------

def test_solve_linear_exact():
    rows = [{0: Fraction(2), 1: Fraction(1)}, {0: Fraction(1), 1: Fraction(3)}]
    assert solve_linear(rows, [Fraction(3), Fraction(5)], 2) == [Fraction(4, 5), Fraction(7, 5)]


def test_solve_linear_singular():
    rows = [{0: Fraction(1), 1: Fraction(1)}, {0: Fraction(2), 1: Fraction(2)}]
    with pytest.raises(SingularSystemError):
        solve_linear(rows, [Fraction(1), Fraction(2)], 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_solve_linear_random_diagonally_dominant(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 6)
    rows = []
    for i in range(n):
        row = {j: Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for j in range(n) if j != i and rng.random() < 0.5}
        row[i] = sum(abs(v) for v in row.values()) + 1
        rows.append({k: v for k, v in row.items() if v})
    x = [Fraction(rng.randint(-5, 5), rng.randint(1, 5)) for _ in range(n)]
    rhs = [sum(v * x[j] for j, v in r.items()) for r in rows]
    assert solve_linear(rows, rhs, n) == x


# -- product chains --------------------------------------------------------------

def _gamblers_ruin():
    half = Fraction(1, 2)
    kernel = {
        ("a", 0): {("b", 0): half, ("win", 1): half},
        ("b", 0): {("a", 0): half, ("lose", 0): half},
        ("win", 1): {("win", 1): Fraction(1)},
        ("lose", 0): {("lose", 0): Fraction(1)},
    }
    return ProductChain(tuple(kernel), kernel, ("a", 0), ((frozenset(), frozenset({1})),), "rabin")


def test_classify_and_solve():
    chain = _gamblers_ruin()
    cls = classify_tsccs(chain)
    assert cls.goal_states() == {("win", 1)}
    assert sum(cls.terminal) == 2
    sol = solve_reachability(chain, cls)
    assert sol[("a", 0)] == Fraction(2, 3)
    assert sol[("b", 0)] == Fraction(1, 3)
    assert sol[("lose", 0)] == 0


def test_streett_reading_of_same_pairs():
    chain = _gamblers_ruin()
    streett = ProductChain(chain.states, chain.kernel, chain.initial,
                           ((frozenset({0}), frozenset({1})),), "streett")
    # Streett pair (E,F): visiting E infinitely often requires F infinitely often
    assert solve_reachability(streett, classify_tsccs(streett))[("a", 0)] == Fraction(2, 3)


def test_explore_chain_drops_zero_entries():
    states, kernel = explore_chain(0, lambda v: {v: Fraction(1), v + 1: Fraction(0)} if v < 3 else {v: Fraction(1)})
    assert states == (0,)
    assert kernel[0] == {0: 1}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_reachability_fixed_point(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 7)
    kernel = {}
    for v in range(n):
        support = rng.sample(range(n), rng.randint(1, n))
        w = [rng.randint(1, 3) for _ in support]
        kernel[(v, rng.randint(0, 1))] = None
    keys = list(kernel)
    for k in keys:
        support = rng.sample(keys, rng.randint(1, len(keys)))
        w = [rng.randint(1, 3) for _ in support]
        kernel[k] = {t: Fraction(x, sum(w)) for t, x in zip(support, w)}
    chain = ProductChain(tuple(keys), kernel, keys[0], ((frozenset(), frozenset({1})),), "rabin")
    sol = solve_reachability(chain, classify_tsccs(chain))
    goal = classify_tsccs(chain).goal_states()
    for v in keys:
        assert 0 <= sol[v] <= 1
        if v not in goal and sol[v] not in (0, 1):
            assert sol[v] == sum(p * sol[w] for w, p in kernel[v].items())
