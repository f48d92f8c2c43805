"""Exact evaluation of history formulas, terms, ⊙, P and D for a fixed valuation.

All probabilities are computed as :class:`fractions.Fraction`. Strategy
quantifiers are not handled here; see :mod:`opsl.search` for a grid-search
fallback and :mod:`opsl.rcf` for the real-arithmetic encoding.
"""
from __future__ import annotations

import weakref
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Optional, Tuple, Union

from .automata import (
    DetAutomaton, NBA, build_obs_nba, complement_to_dsa, lift_phi_dsa, product_dsa, trim_nba,
)
from .graphs import has_cycle_through, tarjan_scc
from .logic import (
    Atom, Binding, Compare, Const, Degree, Exists, FullObs, HistoryFormula, Inverse, Not, Or,
    PathFormula, Plus, PNot, Prob, Times, Top, Valuation, free_vars,
    max_state_subformulas,
)
from .ltl import ltl_to_nba
from .markov import ProductChain, classify_tsccs, explore_chain, solve_reachability
from .model import Pomas, State, StrategyProfile, joint_action_prob
from .safra import DEFAULT_BUDGET, safra_determinize

Labeller = Callable[[State], FrozenSet]


class Undefined:
    """Value of a term whose evaluation divides by zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = Undefined()
TermValue = Union[Fraction, Undefined]


class EngineError(Exception):
    pass


class QuantifierNotSupported(EngineError):
    """The concrete engine cannot decide strategy quantifiers."""


class BindingError(EngineError):
    pass


XI = "ξ"  # pseudo joint action at the root of the ⊙ graph


class Engine:
    """Caching evaluator bound to one model.

    Automata depend only on the path formula, so they are cached per formula;
    state labels are memoised per (state, subformula, relevant strategies).

    ``degree_on_zero`` is the value of a D term whose denominator is 0. The
    default ``None`` leaves it undefined, so enclosing comparisons are false;
    passing 1 reproduces what the rcf encoder asserts in that case.
    """

    def __init__(self, model: Pomas, budget: int = DEFAULT_BUDGET, degree_on_zero: Optional[Fraction] = None):
        self.model = model
        self.budget = budget
        self.degree_on_zero = None if degree_on_zero is None else Fraction(degree_on_zero)
        self._nba: Dict = {}
        self._dra: Dict = {}
        self._dsa: Dict = {}
        self._holds: Dict = {}
        self.stats: Dict[str, int] = {}

    # -- automata caches ---------------------------------------------------

    def nba(self, phi: PathFormula) -> NBA:
        if phi not in self._nba:
            self._nba[phi] = ltl_to_nba(phi)
        return self._nba[phi]

    def dra(self, phi: PathFormula) -> DetAutomaton:
        if phi not in self._dra:
            self._dra[phi] = safra_determinize(self.nba(phi), budget=self.budget)
        return self._dra[phi]

    def dsa(self, phi: PathFormula) -> DetAutomaton:
        """Streett automaton for ``phi``, via the complement of a Rabin automaton for ¬phi."""
        if phi not in self._dsa:
            self._dsa[phi] = complement_to_dsa(self.dra(_negate(phi)))
        return self._dsa[phi]

    def _note(self, key: str, size: int):
        self.stats[key] = max(self.stats.get(key, 0), size)

    # -- history formulas --------------------------------------------------

    def holds(self, s: State, phi: HistoryFormula, nu: Valuation) -> bool:
        if isinstance(phi, Atom):
            return phi.name in self.model.labels[s]
        if isinstance(phi, Top):
            return True
        if isinstance(phi, Not):
            return not self.holds(s, phi.arg, nu)
        if isinstance(phi, Or):
            return self.holds(s, phi.left, nu) or self.holds(s, phi.right, nu)
        if isinstance(phi, Exists):
            raise QuantifierNotSupported(
                f"strategy quantifier over {phi.var!r} needs the rcf engine or a grid search"
            )
        key = (s, phi, tuple((x, nu[x]) for x in sorted(free_vars(phi)) if x in nu))
        if key in self._holds:
            return self._holds[key]
        if isinstance(phi, Compare):
            left = self.term(s, phi.left, nu)
            right = self.term(s, phi.right, nu)
            if left is UNDEFINED or right is UNDEFINED:
                result = False
            elif phi.op == "<":
                result = left < right
            elif phi.op == ">":
                result = left > right
            else:
                result = left == right
        elif isinstance(phi, FullObs):
            result = self.full_obs(s, phi.agent, phi.path, nu)
        else:
            raise TypeError(f"not a history formula: {phi!r}")
        self._holds[key] = result
        return result

    def labeller(self, phi: PathFormula, nu: Valuation) -> Labeller:
        atoms = max_state_subformulas(phi)
        cache: Dict[State, FrozenSet] = {}

        def label(t: State) -> FrozenSet:
            if t not in cache:
                cache[t] = frozenset(h for h in atoms if self.holds(t, h, nu))
            return cache[t]

        return label

    # -- terms -------------------------------------------------------------

    def profile(self, binding: Binding, nu: Valuation) -> StrategyProfile:
        agents = self.model.agents
        if not binding.covers(agents):
            raise BindingError(f"binding does not assign every agent of {list(agents)}")
        return nu.profile(binding, agents)

    def term(self, s: State, t, nu: Valuation) -> TermValue:
        if isinstance(t, Const):
            return Fraction(t.value)
        if isinstance(t, Inverse):
            v = self.term(s, t.arg, nu)
            if v is UNDEFINED or v == 0:
                return UNDEFINED
            return 1 / v
        if isinstance(t, (Plus, Times)):
            a = self.term(s, t.left, nu)
            b = self.term(s, t.right, nu)
            if a is UNDEFINED or b is UNDEFINED:
                return UNDEFINED
            return a + b if isinstance(t, Plus) else a * b
        if isinstance(t, Prob):
            return self.prob(s, t.path, self.profile(t.binding, nu), self.labeller(t.path, nu))
        if isinstance(t, Degree):
            if t.agent not in self.model.agents:
                raise EngineError(f"unknown agent {t.agent!r}")
            num, den = self.degree_parts(
                s, t.agent, t.path, self.profile(t.binding, nu), self.labeller(t.path, nu)
            )
            if den == 0:
                return UNDEFINED if self.degree_on_zero is None else self.degree_on_zero
            return num / den
        raise TypeError(f"not a term: {t!r}")

    # -- P terms -----------------------------------------------------------

    def prob(self, s: State, phi: PathFormula, profile: StrategyProfile, label: Labeller) -> Fraction:
        """Probability of the paths from ``s`` satisfying ``phi``."""
        model = self.model
        dra = self.dra(phi)
        rows = _ChainRows(model, profile)

        def step(v):
            t, q = v
            q2 = dra.step(q, label(t))
            return {(t2, q2): p for t2, p in rows(t).items()}

        init = (s, dra.initial)
        states, kernel = explore_chain(init, step)
        chain = ProductChain(states, kernel, init, dra.acceptance, "rabin")
        self._note("product_states", len(states))
        return solve_reachability(chain, classify_tsccs(chain))[init]

    # -- D terms -----------------------------------------------------------

    def obs_dsa(self, s: State, agent: str, phi: PathFormula, label: Labeller) -> DetAutomaton:
        """Streett automaton over model letters for the paths from ``s`` that
        ``agent`` cannot tell apart from any ¬phi path."""
        labels = tuple(label(t) for t in self.model.states)
        key = (s, agent, phi, labels)
        if key not in self._dsa:
            n0 = self.nba(_negate(phi))
            nba = trim_nba(build_obs_nba(self.model, s, agent, n0, label))
            self._note("obs_nba_states", len(nba.states))
            dra = safra_determinize(nba, budget=self.budget)
            self._note("obs_dra_states", len(dra.states))
            self._dsa[key] = complement_to_dsa(dra)
        return self._dsa[key]

    def degree_parts(self, s: State, agent: str, phi: PathFormula, profile: StrategyProfile,
                     label: Labeller) -> Tuple[Fraction, Fraction]:
        """Numerator and denominator of the degree of observability."""
        model = self.model
        a_phi = lift_phi_dsa(model, s, self.dsa(phi), label)
        both = product_dsa(a_phi, self.obs_dsa(s, agent, phi, label))
        self._note("degree_dsa_states", len(both.states))
        weights = _JointWeights(model, profile)

        def step(v):
            t, x = v
            row: Dict = {}
            for joint, w in weights(t):
                for t2, p in model.transition[(t, joint)].items():
                    if p:
                        nxt = (t2, both.step(x, (joint, t2)))
                        row[nxt] = row.get(nxt, Fraction(0)) + w * p
            return row

        init = (s, both.initial)
        states, kernel = explore_chain(init, step)
        chain = ProductChain(states, kernel, init, both.acceptance, "streett")
        self._note("product_states", len(states))
        num = solve_reachability(chain, classify_tsccs(chain))[init]
        den = self.prob(s, phi, profile, label)
        return num, den

    def degree(self, s, agent, phi, profile, label) -> TermValue:
        num, den = self.degree_parts(s, agent, phi, profile, label)
        return UNDEFINED if den == 0 else num / den

    # -- ⊙ -----------------------------------------------------------------

    def full_obs(self, s: State, agent: str, phi: PathFormula, nu: Valuation) -> bool:
        """Whether no phi path from ``s`` looks like a ¬phi path to ``agent``."""
        model = self.model
        if agent not in model.agents:
            raise EngineError(f"unknown agent {agent!r}")
        label = self.labeller(phi, nu)
        a_pos = self.nba(phi)
        a_neg = self.nba(_negate(phi))
        o = model.obs[agent]
        moves = {
            t: [(j, t2, o.pair(j, t2)) for j in model.joint_actions for t2 in model.successors(t, j)]
            for t in model.states
        }
        root = (XI, s, a_pos.initial, XI, s, a_neg.initial, 1)

        # b = 0 is absorbing and F only contains b = 1, so such vertices are never expanded
        def succ(v):
            _, s1, q1, _, s1p, q1p, _ = v
            q2s = a_pos.successors(q1, label(s1))
            q2ps = a_neg.successors(q1p, label(s1p))
            if not q2s or not q2ps:
                return []
            out = []
            for j, s2, ob in moves[s1]:
                for jp, s2p, obp in moves[s1p]:
                    if ob != obp:
                        continue
                    for q2 in q2s:
                        for q2p in q2ps:
                            out.append((j, s2, q2, jp, s2p, q2p, 1))
            return out

        count = 0
        for comp in tarjan_scc([root], succ):
            count += len(comp)
            if any(v[2] in a_pos.accepting and v[5] in a_neg.accepting for v in comp):
                if has_cycle_through(comp, succ):
                    self._note("obs_graph_vertices", count)
                    return False
        self._note("obs_graph_vertices", count)
        return True


class _JointWeights:
    """Joint actions with positive probability at a state, computed on demand."""

    def __init__(self, model: Pomas, profile: StrategyProfile):
        self.model, self.profile, self.cache = model, profile, {}

    def __call__(self, t: State):
        if t not in self.cache:
            m = self.model
            pairs = ((j, joint_action_prob(m, self.profile, t, j)) for j in m.joint_actions)
            self.cache[t] = [(j, w) for j, w in pairs if w != 0]
        return self.cache[t]


class _ChainRows(_JointWeights):
    """Rows of the induced chain, computed on demand."""

    def __call__(self, t: State):
        key = ("row", t)
        if key not in self.cache:
            row: Dict = {}
            for j, w in super().__call__(t):
                for t2, p in self.model.transition[(t, j)].items():
                    if p:
                        row[t2] = row.get(t2, Fraction(0)) + w * p
            self.cache[key] = row
        return self.cache[key]


def _negate(phi: PathFormula) -> PathFormula:
    return phi.arg if isinstance(phi, PNot) else PNot(phi)


_engines: "weakref.WeakKeyDictionary[Pomas, Engine]" = weakref.WeakKeyDictionary()


def engine_for(model: Pomas) -> Engine:
    eng = _engines.get(model)
    if eng is None:
        eng = _engines[model] = Engine(model)
    return eng


def eval_history(model: Pomas, s: State, phi: HistoryFormula, nu: Optional[Valuation] = None) -> bool:
    return engine_for(model).holds(s, phi, nu if nu is not None else Valuation())


def eval_term(model: Pomas, s: State, t, nu: Optional[Valuation] = None) -> TermValue:
    return engine_for(model).term(s, t, nu if nu is not None else Valuation())


def check_full_obs(model: Pomas, s: State, agent: str, phi: PathFormula,
                   nu: Optional[Valuation] = None) -> bool:
    return engine_for(model).full_obs(s, agent, phi, nu if nu is not None else Valuation())


def _default_labeller(model: Pomas, phi: PathFormula, label: Optional[Labeller]) -> Labeller:
    return label if label is not None else engine_for(model).labeller(phi, Valuation())


def prob_of(model: Pomas, s: State, phi: PathFormula, profile: StrategyProfile,
            label: Optional[Labeller] = None) -> Fraction:
    return engine_for(model).prob(s, phi, profile, _default_labeller(model, phi, label))


def degree_parts(model: Pomas, s: State, agent: str, phi: PathFormula, profile: StrategyProfile,
                 label: Optional[Labeller] = None) -> Tuple[Fraction, Fraction]:
    return engine_for(model).degree_parts(s, agent, phi, profile, _default_labeller(model, phi, label))


def degree_of(model: Pomas, s: State, agent: str, phi: PathFormula, profile: StrategyProfile,
              label: Optional[Labeller] = None) -> TermValue:
    num, den = degree_parts(model, s, agent, phi, profile, label)
    return UNDEFINED if den == 0 else num / den
