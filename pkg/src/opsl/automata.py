"""Büchi, Rabin and Streett automata and the model-lifted constructions.

Alphabet letters are arbitrary hashable values. Over ``W = 2^Max(Φ)`` a
letter is a frozenset of history formulas; over the model alphabet a letter
is a pair ``(joint_action, state)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Hashable, List, Mapping, Set, Tuple

from .graphs import has_cycle_through, reachable, tarjan_scc
from .model import Agent, Pomas, State

Letter = Hashable
Labeller = Callable[[State], FrozenSet]


class StateBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NBA:
    states: Tuple
    alphabet: Tuple
    delta: Mapping[Tuple[Hashable, Letter], FrozenSet]
    initial: Hashable
    accepting: FrozenSet

    def successors(self, q, letter) -> FrozenSet:
        return self.delta.get((q, letter), frozenset())

    def graph_successors(self, q) -> Set:
        return {r for a in self.alphabet for r in self.successors(q, a)}


@dataclass(frozen=True, eq=False)
class DetAutomaton:
    """Deterministic automaton with pair acceptance; ``kind`` is rabin or streett."""

    states: Tuple
    alphabet: Tuple
    delta: Mapping[Tuple[Hashable, Letter], Hashable]
    initial: Hashable
    acceptance: Tuple[Tuple[FrozenSet, FrozenSet], ...]
    kind: str

    def step(self, q, letter):
        return self.delta[(q, letter)]

    def accepts_inf(self, inf: Set) -> bool:
        """Decide acceptance from the set of states a run visits infinitely often."""
        if self.kind == "rabin":
            return any(not (inf & e) and bool(inf & f) for e, f in self.acceptance)
        return all(not (inf & e) or bool(inf & f) for e, f in self.acceptance)


def DRA(states, alphabet, delta, initial, acceptance) -> DetAutomaton:
    return DetAutomaton(tuple(states), tuple(alphabet), delta, initial, tuple(acceptance), "rabin")


def DSA(states, alphabet, delta, initial, acceptance) -> DetAutomaton:
    return DetAutomaton(tuple(states), tuple(alphabet), delta, initial, tuple(acceptance), "streett")


@dataclass(frozen=True)
class LassoWord:
    prefix: Tuple
    loop: Tuple

    def __post_init__(self):
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    def __len__(self):
        return len(self.prefix) + len(self.loop)

    def at(self, k: int):
        n = len(self.prefix)
        return self.prefix[k] if k < n else self.loop[(k - n) % len(self.loop)]

    def next_pos(self, k: int) -> int:
        return k + 1 if k + 1 < len(self) else len(self.prefix)


def lasso_accepts(aut, word: LassoWord) -> bool:
    if isinstance(aut, NBA):
        return _nba_accepts(aut, word)
    return _det_accepts(aut, word)


def _nba_accepts(aut: NBA, word: LassoWord) -> bool:
    def succ(node):
        q, k = node
        letter = word.at(k)
        nxt = word.next_pos(k)
        return [(r, nxt) for r in aut.successors(q, letter)]

    start = (aut.initial, 0)
    for comp in tarjan_scc([start], succ):
        if any(q in aut.accepting for q, _ in comp) and has_cycle_through(comp, succ):
            return True
    return False


def _det_accepts(aut: DetAutomaton, word: LassoWord) -> bool:
    q = aut.initial
    for letter in word.prefix:
        q = aut.step(q, letter)
    first_seen: Dict = {}
    visits: List[List] = []
    while q not in first_seen:
        first_seen[q] = len(visits)
        run = []
        for letter in word.loop:
            run.append(q)
            q = aut.step(q, letter)
        visits.append(run)
    inf = set()
    for run in visits[first_seen[q]:]:
        inf.update(run)
    return aut.accepts_inf(inf)


def complement_to_dsa(d: DetAutomaton) -> DetAutomaton:
    """Complement a Rabin automaton (or a Streett one) by dualising its pairs.

    Not (E finitely often and F infinitely often) is (F finitely often or E
    infinitely often), so each pair (E, F) becomes the pair (F, E).
    """
    pairs = tuple((f, e) for e, f in d.acceptance)
    kind = "streett" if d.kind == "rabin" else "rabin"
    return DetAutomaton(d.states, d.alphabet, d.delta, d.initial, pairs, kind)


def product_dsa(a: DetAutomaton, b: DetAutomaton) -> DetAutomaton:
    """Synchronous product of two Streett automata; accepts the intersection."""
    if a.kind != "streett" or b.kind != "streett":
        raise ValueError("product_dsa expects Streett automata")
    if set(a.alphabet) != set(b.alphabet):
        raise ValueError("alphabets differ")
    init = (a.initial, b.initial)
    delta = {}
    order = [init]
    seen = {init}
    i = 0
    while i < len(order):
        x, y = order[i]
        i += 1
        for letter in a.alphabet:
            nxt = (a.step(x, letter), b.step(y, letter))
            delta[((x, y), letter)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
    pairs = []
    for e, f in a.acceptance:
        pairs.append((frozenset(p for p in order if p[0] in e), frozenset(p for p in order if p[0] in f)))
    for e, f in b.acceptance:
        pairs.append((frozenset(p for p in order if p[1] in e), frozenset(p for p in order if p[1] in f)))
    return DSA(order, a.alphabet, delta, init, pairs)


def model_alphabet(model: Pomas) -> Tuple:
    return tuple((joint, t) for joint in model.joint_actions for t in model.states)


V_ERR = "v_err"


def lift_phi_dsa(model: Pomas, s: State, d0: DetAutomaton, labeller: Labeller) -> DetAutomaton:
    """Streett automaton over ``Act^Ag x S`` accepting the Φ-paths from ``s``.

    ``d0`` is a Streett automaton for Φ over ``W``; ``labeller(t)`` returns the
    letter of ``W`` holding at model state ``t``.
    """
    if d0.kind != "streett":
        raise ValueError("lift_phi_dsa expects a Streett automaton")
    alphabet = model_alphabet(model)
    init = (s, d0.initial)
    order = [init]
    seen = {init}
    delta = {}
    i = 0
    while i < len(order):
        x = order[i]
        i += 1
        if x == V_ERR:
            for letter in alphabet:
                delta[(x, letter)] = V_ERR
            continue
        t, q = x
        q2 = d0.step(q, labeller(t))
        for letter in alphabet:
            joint, t2 = letter
            nxt = (t2, q2) if model.prob(t, joint, t2) > 0 else V_ERR
            delta[(x, letter)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
    pairs = [
        (frozenset(x for x in order if x != V_ERR and x[1] in e),
         frozenset(x for x in order if x != V_ERR and x[1] in f))
        for e, f in d0.acceptance
    ]
    pairs.append((frozenset([V_ERR]) & seen, frozenset(x for x in order if x != V_ERR)))
    return DSA(order, alphabet, delta, init, pairs)


def build_obs_nba(model: Pomas, s: State, agent: Agent, n0: NBA, labeller: Labeller) -> NBA:
    """NBA over ``Act^Ag x S`` accepting the paths from ``s`` that ``agent``
    cannot tell apart from some path accepted by ``n0`` (an NBA for ¬Φ over W).
    """
    alphabet = model_alphabet(model)
    o = model.obs[agent]
    joints = model.joint_actions
    # observable -> successor states of s1' producing it
    guess_cache: Dict = {}

    def guesses(s1p):
        if s1p not in guess_cache:
            table: Dict = {}
            for jp in joints:
                for s2p in model.successors(s1p, jp):
                    table.setdefault(o.pair(jp, s2p), set()).add(s2p)
            guess_cache[s1p] = table
        return guess_cache[s1p]

    init = (s, s, n0.initial)
    order = [init]
    seen = {init}
    delta: Dict = {}
    i = 0
    while i < len(order):
        s1, s1p, q1 = order[i]
        i += 1
        q2s = n0.successors(q1, labeller(s1p))
        if not q2s:
            continue
        table = guesses(s1p)
        for joint in joints:
            for t in model.successors(s1, joint):
                targets = set()
                for s2p in table.get(o.pair(joint, t), ()):
                    for q2 in q2s:
                        targets.add((t, s2p, q2))
                if targets:
                    delta[((s1, s1p, q1), (joint, t))] = frozenset(targets)
                    for nxt in targets:
                        if nxt not in seen:
                            seen.add(nxt)
                            order.append(nxt)
    accepting = frozenset(x for x in order if x[2] in n0.accepting)
    return NBA(tuple(order), alphabet, delta, init, accepting)


def trim_nba(n: NBA) -> NBA:
    """Drop states that are unreachable or cannot reach an accepting cycle."""
    live = reachable([n.initial], n.graph_successors)
    good = set()
    for comp in tarjan_scc([n.initial], n.graph_successors):
        if any(q in n.accepting for q in comp) and has_cycle_through(comp, n.graph_successors):
            good.update(comp)
    # backward closure to states that can reach a good SCC
    preds: Dict = {}
    for q in live:
        for r in n.graph_successors(q):
            preds.setdefault(r, set()).add(q)
    productive = reachable(good, lambda r: preds.get(r, ()))
    keep = productive | {n.initial}
    states = tuple(q for q in n.states if q in keep)
    delta = {}
    for (q, a), targets in n.delta.items():
        if q in keep:
            kept = frozenset(r for r in targets if r in productive)
            if kept:
                delta[(q, a)] = kept
    return NBA(states, n.alphabet, delta, n.initial, frozenset(q for q in n.accepting if q in keep))
