"""Random instance generators and independent oracles shared by the tests.

The oracles deliberately avoid the package's own algorithms: probabilities
come from exhaustive history enumeration, automaton acceptance from
networkx graph searches over explicit run graphs.
"""
from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Dict, List, Sequence

import networkx as nx

from opsl.automata import NBA, DetAutomaton, LassoWord
from opsl.logic import Atom, Lift, Next, PNot, POr, Until, eventually, always
from opsl.model import CIRCLE, EPSILON, MemorylessStrategy, Observation, Pomas, build_model

DENOMS = (1, 2, 3, 4, 5)


def random_distribution(rng: random.Random, support: Sequence) -> Dict:
    """Rational distribution with small denominators over a nonempty subset of ``support``."""
    chosen = rng.sample(list(support), rng.randint(1, len(support)))
    weights = [rng.randint(1, 4) for _ in chosen]
    total = sum(weights)
    return {x: Fraction(w, total) for x, w in zip(chosen, weights)}


def random_model(rng: random.Random, n_states: int = None, n_agents: int = None, n_actions: int = None,
                 acyclic: bool = False, props: Sequence[str] = ("p", "q")) -> Pomas:
    """A random model with at most 5 states, 2 agents and 2 actions per agent.

    With ``acyclic`` every non-absorbing state only moves to higher-numbered
    states and the last one or two states are absorbing, so every path is
    absorbed after fewer than ``n_states`` steps.
    """
    n = n_states or rng.randint(2, 5)
    k = n_agents or rng.randint(1, 2)
    m = n_actions or rng.randint(1, 2)
    agents = [str(i + 1) for i in range(k)]
    states = [f"s{i}" for i in range(n)]
    actions = {a: ["a", "b"][:m] for a in agents}
    joints = list(itertools.product(*(actions[a] for a in agents)))
    n_abs = 1 if n == 2 else rng.randint(1, 2)
    transition = {}
    for i, s in enumerate(states):
        for j in joints:
            if acyclic and i >= n - n_abs:
                transition[(s, j)] = {s: Fraction(1)}
            elif acyclic:
                transition[(s, j)] = random_distribution(rng, states[i + 1:])
            else:
                transition[(s, j)] = random_distribution(rng, states)
    labels = {s: [p for p in props if rng.random() < 0.4] for s in states}
    obs = {}
    for a in agents:
        if rng.random() < 0.3:
            continue  # perfect observation
        sobs = {s: rng.choice(["o1", "o2", CIRCLE]) for s in states}
        aobs = {j: rng.choice(["x", "y", EPSILON]) for j in joints}
        obs[a] = Observation(sobs, aobs)
    return build_model(agents, states, actions, transition, labels, obs)


def random_strategy(rng: random.Random, model: Pomas, agent: str) -> MemorylessStrategy:
    acts = model.actions[agent]
    table = {}
    for theta in sorted(model.state_observables(agent)):
        if rng.random() < 0.3:
            pick = rng.choice(acts)
            table[theta] = {a: Fraction(int(a == pick)) for a in acts}
        else:
            w = [rng.randint(0, 3) for _ in acts]
            if sum(w) == 0:
                w[0] = 1
            table[theta] = {a: Fraction(x, sum(w)) for a, x in zip(acts, w)}
    return MemorylessStrategy(table)


def random_profile(rng: random.Random, model: Pomas) -> Dict[str, MemorylessStrategy]:
    return {a: random_strategy(rng, model, a) for a in model.agents}


def random_ltl(rng: random.Random, depth: int, props: Sequence[str] = ("p", "q")):
    if depth == 0 or rng.random() < 0.25:
        return Lift(Atom(rng.choice(props)))
    op = rng.choice(["not", "or", "X", "U", "F", "G"])
    if op == "not":
        return PNot(random_ltl(rng, depth - 1, props))
    if op == "X":
        return Next(random_ltl(rng, depth - 1, props))
    if op == "F":
        return eventually(random_ltl(rng, depth - 1, props))
    if op == "G":
        return always(random_ltl(rng, depth - 1, props))
    left, right = random_ltl(rng, depth - 1, props), random_ltl(rng, depth - 1, props)
    return POr(left, right) if op == "or" else Until(left, right)


def random_nba(rng: random.Random, n_states: int, alphabet: Sequence = ("a", "b"), density: float = 0.35) -> NBA:
    states = tuple(range(n_states))
    delta = {}
    for q in states:
        for a in alphabet:
            succ = frozenset(r for r in states if rng.random() < density)
            if succ:
                delta[(q, a)] = succ
    accepting = frozenset(q for q in states if rng.random() < 0.4)
    return NBA(states, tuple(alphabet), delta, 0, accepting)


def random_lasso(rng: random.Random, alphabet: Sequence, max_prefix: int = 4, max_loop: int = 4) -> LassoWord:
    prefix = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, max_prefix)))
    loop = tuple(rng.choice(alphabet) for _ in range(rng.randint(1, max_loop)))
    return LassoWord(prefix, loop)


# -- oracles ------------------------------------------------------------------

def _position_count(word: LassoWord) -> int:
    return len(word.prefix) + len(word.loop)


def _next_position(word: LassoWord, k: int) -> int:
    k += 1
    return k if k < _position_count(word) else len(word.prefix)


def _letter(word: LassoWord, k: int):
    return word.prefix[k] if k < len(word.prefix) else word.loop[k - len(word.prefix)]


def nba_accepts(nba: NBA, word: LassoWord) -> bool:
    """Büchi acceptance of a lasso via the run graph over (state, position)."""
    g = nx.DiGraph()
    start = (nba.initial, 0)
    g.add_node(start)
    stack = [start]
    while stack:
        q, k = stack.pop()
        for r in nba.delta.get((q, _letter(word, k)), ()):
            node = (r, _next_position(word, k))
            if node not in g:
                stack.append(node)
            g.add_edge((q, k), node)
    live = nx.descendants(g, start) | {start}
    sub = g.subgraph(live)
    for comp in nx.strongly_connected_components(sub):
        nontrivial = len(comp) > 1 or any(sub.has_edge(v, v) for v in comp)
        if nontrivial and any(q in nba.accepting for q, _ in comp):
            return True
    return False


def det_accepts(aut: DetAutomaton, word: LassoWord) -> bool:
    """Rabin or Streett acceptance of a lasso by running until a configuration repeats."""
    seen: Dict = {}
    run: List = []
    q, k = aut.initial, 0
    while (q, k) not in seen:
        seen[(q, k)] = len(run)
        run.append(q)
        q, k = aut.delta[(q, _letter(word, k))], _next_position(word, k)
    inf = set(run[seen[(q, k)]:])
    if aut.kind == "rabin":
        return any(not (inf & set(e)) and (inf & set(f)) for e, f in aut.acceptance)
    return all(not (inf & set(e)) or (inf & set(f)) for e, f in aut.acceptance)


def brute_force_eventually(model: Pomas, s: str, prop: str, profile: Dict[str, MemorylessStrategy]) -> Fraction:
    """P(F prop) by enumerating every history until it hits ``prop`` or an absorbing state.

    Only terminates on models whose paths are all absorbed (e.g. acyclic ones).
    """
    joints = list(itertools.product(*(model.actions[a] for a in model.agents)))

    def absorbing(t):
        return all(model.transition[(t, j)] == {t: 1} for j in joints)

    def weight(t, joint):
        w = Fraction(1)
        for agent, act in zip(model.agents, joint):
            w *= profile[agent][model.obs[agent].state_obs[t]].get(act, Fraction(0))
        return w

    total = Fraction(0)
    stack = [((s,), Fraction(1))]
    while stack:
        hist, mass = stack.pop()
        t = hist[-1]
        if prop in model.labels[t]:
            total += mass
            continue
        if absorbing(t):
            continue
        if len(hist) > 64:
            raise RuntimeError("history did not get absorbed")
        for j in joints:
            w = weight(t, j)
            if w == 0:
                continue
            for t2, p in model.transition[(t, j)].items():
                if p:
                    stack.append((hist + (t2,), mass * w * p))
    return total


def scc_oracle(nodes, succ):
    """Strongly connected components via networkx, as a set of frozensets."""
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    for v in nodes:
        for w in succ(v):
            g.add_edge(v, w)
    return {frozenset(c) for c in nx.strongly_connected_components(g)}
