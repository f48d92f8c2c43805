"""Translate oPSL sentences into sentences of real arithmetic.

The translation follows the recursive construction ``a(φ, s)``: strategy
quantifiers become blocks of probability variables, comparisons introduce one
variable per subterm, and P/D terms internalise the product-chain procedure
(transition entries, reachability by edge-closed mark sets, accepting tSCCs
and the linear system). Automata are built outside the sentence.

Everything the model decides on its own is folded to constants, and only
vertices reachable under some strategy are materialised.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Hashable, Iterator, List, Mapping, Sequence, Tuple

from ..automata import DetAutomaton, NBA, build_obs_nba, lift_phi_dsa, trim_nba
from ..engine import Engine, XI
from ..graphs import has_cycle_through, reachable, tarjan_scc
from ..logic import (
    Atom, Binding, Compare, Const, Degree, Exists, FullObs, HistoryFormula, Inverse, Not, Or,
    PathFormula, Plus, PNot, Prob, Times, Top, Valuation, is_propositional, is_sentence, max_state_subformulas,
    subterms,
)
from ..model import Pomas, State
from ..safra import DEFAULT_BUDGET, SafraTree, nodes, steps_1_2, steps_4_6
from ..search import variable_domain
from . import syntax as R
from .syntax import Formula, Term, Var

INTERNAL_SAFRA_BUDGET = 4096


class EncodingError(Exception):
    pass


class UnsupportedNesting(EncodingError):
    """A D-term whose path formula has non-propositional maximal subformulas."""


class EncodingBudgetExceeded(EncodingError):
    pass


class VariableLedger:
    """Registry of generated variable names, one family per kind of quantity.

    Families: ``strat`` (strategy entries r_{x,θ,a}), ``term`` (r_τ),
    ``edge`` (product-chain entries r_v^w), ``sol``, ``mark``, ``trans``
    (truth values of transition formulas) and ``aux``.
    """

    FAMILIES = ("strat", "term", "edge", "sol", "mark", "trans", "aux")

    def __init__(self):
        self._count: Dict[str, int] = {f: 0 for f in self.FAMILIES}
        self.entries: Dict[str, Tuple[str, Tuple]] = {}

    def fresh(self, family: str, *index) -> Var:
        if family not in self._count:
            raise KeyError(f"unknown variable family {family!r}")
        k = self._count[family]
        self._count[family] = k + 1
        name = f"r_{family}_{k}"
        self.entries[name] = (family, index)
        return Var(name)

    def family_sizes(self) -> Dict[str, int]:
        return dict(self._count)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name: str):
        return name in self.entries


@dataclass
class _Scope:
    """Strategy variables in scope: quantified variable -> {(θ, a): Var}."""

    strategies: Dict[str, Dict[Tuple[str, str], Var]] = field(default_factory=dict)

    def extend(self, x: str, table) -> "_Scope":
        d = dict(self.strategies)
        d[x] = table
        return _Scope(d)


# -- constructors for the individual formula families -------------------------

def dist(table: Mapping[Tuple[str, str], Var], observables: Sequence[str], actions: Sequence[str]) -> Formula:
    """Dist_x: every row of strategy variables is a probability distribution."""
    nonneg = [R.ge(table[(th, a)], R.ZERO) for th in observables for a in actions]
    rows = [R.eq(R.add(*(table[(th, a)] for a in actions)), R.ONE) for th in observables]
    return R.and_(nonneg, rows)


def letter_formula(atoms: Sequence[HistoryFormula], letter: FrozenSet, truth: Callable) -> Formula:
    """The state satisfies exactly the members of ``letter`` among ``atoms``."""
    return R.and_([truth(h) if h in letter else R.not_(truth(h)) for h in atoms])


def tr_nba(nba: NBA, q1, q2, atoms, truth: Callable) -> Formula:
    """Tr_{Ψ,q,q'}^t for an NBA over W: some letter holding at t moves q to q'."""
    return R.or_([letter_formula(atoms, X, truth) for X in nba.alphabet if q2 in nba.successors(q1, X)])


def tr_det(dra: DetAutomaton, q1, q2, atoms, truth: Callable) -> Formula:
    """Tr_{q,q'}^t for a deterministic automaton over W."""
    return R.or_([letter_formula(atoms, X, truth) for X in dra.alphabet if dra.step(q1, X) == q2])


def edge(*conjuncts: Formula) -> Formula:
    """Edge of the ⊙ graph: both automaton moves, both model moves, the bit rule."""
    return R.and_(*conjuncts)


def closure(marks: Mapping[Hashable, Var], edges: Mapping[Tuple, Formula]) -> Formula:
    """Cl: the marked vertex set is closed under the edge relation."""
    return R.and_([
        R.implies(R.and_(R.ne(marks[v], R.ZERO), e), R.ne(marks[w], R.ZERO))
        for (v, w), e in edges.items()
    ])


def reach(marks: Mapping[Hashable, Var], cl: Formula, v, w) -> Formula:
    """Reach_v^w: every edge-closed set containing v contains w."""
    return R.forall(
        [marks[u] for u in marks],
        R.implies(R.and_(cl, R.ne(marks[v], R.ZERO)), R.ne(marks[w], R.ZERO)),
    )


def goal_rabin(v, vertices, reach_f: Callable, pairs: Sequence[Tuple[FrozenSet, FrozenSet]]) -> Formula:
    """Goal_v for a Rabin condition given as pairs of vertex sets."""
    terminal = R.and_([R.implies(reach_f(v, w), reach_f(w, v)) for w in vertices])
    acc = R.or_([
        R.and_(R.or_([reach_f(v, w) for w in vertices if w in f]),
               R.and_([R.not_(reach_f(v, w)) for w in vertices if w in e]))
        for e, f in pairs
    ])
    return R.and_(terminal, acc)


def goal_streett(v, vertices, reach_f: Callable, pairs: Sequence[Tuple[FrozenSet, FrozenSet]]) -> Formula:
    """Goal_v for a Streett condition given as pairs of vertex sets."""
    terminal = R.and_([R.implies(reach_f(v, w), reach_f(w, v)) for w in vertices])
    acc = R.and_([
        R.or_(R.or_([reach_f(v, w) for w in vertices if w in f]),
              R.and_([R.not_(reach_f(v, w)) for w in vertices if w in e]))
        for e, f in pairs
    ])
    return R.and_(terminal, acc)


def sol(vertices, goal: Mapping, reach_f: Callable, entry: Mapping, sol_vars: Mapping) -> Formula:
    """Sol: the three-case linear system for the probability of reaching an accepting tSCC."""
    parts = []
    for v in vertices:
        reaches_goal = R.or_([R.and_(goal[w], reach_f(v, w)) for w in vertices])
        total = R.add(*(R.mul(entry[(v, w)], sol_vars[w]) for w in vertices if (v, w) in entry))
        parts.append(R.implies(goal[v], R.eq(sol_vars[v], R.ONE)))
        parts.append(R.implies(R.not_(reaches_goal), R.eq(sol_vars[v], R.ZERO)))
        parts.append(R.implies(R.and_(R.not_(goal[v]), reaches_goal), R.eq(sol_vars[v], total)))
    return R.and_(parts)


def prod(entry_vars: Mapping, transitions: Mapping[Tuple, Formula], values: Mapping[Tuple, Term]) -> Formula:
    """Prod_β: chain entries equal the weighted sum when the automaton moves, else 0."""
    parts = []
    for key, var in entry_vars.items():
        tr = transitions[key]
        parts.append(R.implies(tr, R.eq(var, values[key])))
        parts.append(R.implies(R.not_(tr), R.eq(var, R.ZERO)))
    return R.and_(parts)


def saf12(tree: SafraTree, nba: NBA, candidate) -> Formula:
    """⊤ iff steps 1 and 2 of the tree update send ``tree`` to ``candidate``."""
    return R.top(steps_1_2(tree, nba) == candidate)


def saf456(candidate, target: SafraTree) -> Formula:
    """⊤ iff steps 4 to 6 send the ordered tree ``candidate`` to ``target``."""
    return R.top(steps_4_6(candidate) == target)


def saf3(before, after, nba_states: Sequence, tr_formula: Callable) -> Formula:
    """Step 3: each macrostate of ``after`` is the successor set of the one in ``before``.

    ``tr_formula(x, x2)`` encodes the NBA transition on the current letter.
    """
    if before is None or after is None:
        return R.top(before is None and after is None)
    b = list(nodes(before))
    a = list(nodes(after))
    same = len(a) == len(b) and all(
        x[0] == y[0] and x[2] == y[2] and len(x[3]) == len(y[3]) for x, y in zip(a, b)
    )
    if not same:
        return R.FALSE
    parts = []
    for (name, k_before, _, _), (_, k_after, _, _) in zip(b, a):
        for x2 in nba_states:
            parts.append(R.iff(R.top(x2 in k_after), R.or_([tr_formula(x1, x2) for x1 in k_before])))
    return R.and_(parts)


def _replace_macros(tree, macros: Iterator):
    name, _, mark, kids = tree
    return (name, next(macros), mark, tuple(_replace_macros(c, macros) for c in kids))


# -- the encoder ---------------------------------------------------------------

@dataclass
class EncodingStats:
    tree_size: int
    dag_size: int
    quantified_variables: int
    quantifier_blocks: int
    variables: Dict[str, int]

    def as_dict(self):
        return {
            "tree_size": self.tree_size,
            "dag_size": self.dag_size,
            "quantified_variables": self.quantified_variables,
            "quantifier_blocks": self.quantifier_blocks,
            "variables": self.variables,
        }


@dataclass
class Encoding:
    sentence: Formula
    ledger: VariableLedger

    def stats(self) -> EncodingStats:
        return EncodingStats(
            R.tree_size(self.sentence), R.dag_size(self.sentence),
            R.quantifier_count(self.sentence), R.quantifier_blocks(self.sentence),
            self.ledger.family_sizes(),
        )


@dataclass
class _Chain:
    """Symbolic product chain ready to be written as Prod ∧ Sol."""

    vertices: List
    initial: Hashable
    transitions: Dict[Tuple, Formula]  # Tr formula per may-edge
    values: Dict[Tuple, Term]          # weighted sum per may-edge
    pairs: List[Tuple[FrozenSet, FrozenSet]]
    kind: str


class Encoder:
    def __init__(self, model: Pomas, budget: int = DEFAULT_BUDGET, internal_safra: bool = False,
                 internal_budget: int = INTERNAL_SAFRA_BUDGET):
        self.model = model
        self.engine = Engine(model, budget=budget)
        self.budget = budget
        self.internal_safra = internal_safra
        self.internal_budget = internal_budget
        self.ledger = VariableLedger()

    # entry point
    def encode(self, s: State, phi: HistoryFormula) -> Encoding:
        if not is_sentence(phi):
            raise EncodingError("only sentences can be encoded; bind every strategy variable with exists")
        return Encoding(self.a(phi, s, _Scope()), self.ledger)

    # -- history formulas --------------------------------------------------

    def a(self, phi: HistoryFormula, s: State, scope: _Scope) -> Formula:
        if isinstance(phi, Atom):
            return R.top(phi.name in self.model.labels[s])
        if isinstance(phi, Top):
            return R.TRUE
        if isinstance(phi, Not):
            return R.not_(self.a(phi.arg, s, scope))
        if isinstance(phi, Or):
            return R.or_(self.a(phi.left, s, scope), self.a(phi.right, s, scope))
        if isinstance(phi, Exists):
            observables, actions = variable_domain(self.model, phi.body, phi.var)
            table = {(th, a): self.ledger.fresh("strat", phi.var, th, a) for th in observables for a in actions}
            body = self.a(phi.body, s, scope.extend(phi.var, table))
            return R.exists(table.values(), R.and_(dist(table, observables, actions), body))
        if isinstance(phi, Compare):
            return self.compare(phi, s, scope)
        if isinstance(phi, FullObs):
            return self.full_obs(phi, s, scope)
        raise TypeError(f"not a history formula: {phi!r}")

    def truth(self, s: State, scope: _Scope) -> Callable[[HistoryFormula], Formula]:
        cache: Dict = {}

        def f(h):
            if h not in cache:
                cache[h] = self.a(h, s, scope)
            return cache[h]

        return f

    # -- comparisons and terms ---------------------------------------------

    def compare(self, phi: Compare, s: State, scope: _Scope) -> Formula:
        rvars: Dict = {}
        for t in list(subterms(phi.left)) + list(subterms(phi.right)):
            if t not in rvars:
                rvars[t] = self.ledger.fresh("term", t)
        left, right = rvars[phi.left], rvars[phi.right]
        rel = {"<": R.lt, "=": R.eq, ">": R.gt}[phi.op](left, right)
        done: set = set()
        body = R.and_(self.eqn(phi.left, s, scope, rvars, done), self.eqn(phi.right, s, scope, rvars, done), rel)
        return R.exists(rvars.values(), body)

    def eqn(self, t, s: State, scope: _Scope, rvars: Dict, done: set) -> Formula:
        """Eqn_{τ,s}; each subterm is constrained once even if it occurs twice."""
        if t in done:
            return R.TRUE
        done.add(t)
        r = rvars[t]
        if isinstance(t, Const):
            return R.eq(r, R.const(t.value))
        if isinstance(t, Inverse):
            return R.and_(self.eqn(t.arg, s, scope, rvars, done), R.eq(R.mul(rvars[t.arg], r), R.ONE))
        if isinstance(t, (Plus, Times)):
            op = R.add if isinstance(t, Plus) else R.mul
            return R.and_(self.eqn(t.left, s, scope, rvars, done), self.eqn(t.right, s, scope, rvars, done),
                          R.eq(r, op(rvars[t.left], rvars[t.right])))
        if isinstance(t, Prob):
            return self.eqn_prob(t.binding, t.path, s, scope, r)
        if isinstance(t, Degree):
            return self.eqn_degree(t, s, scope, r)
        raise TypeError(f"not a term: {t!r}")

    def strategy_entry(self, scope: _Scope, binding: Binding, s: State, joint) -> Term:
        """Π_k r_{β(k), obs_k(s), α_k}"""
        factors = []
        for agent, action in zip(self.model.agents, joint):
            x = binding.variable(agent)
            if x not in scope.strategies:
                raise EncodingError(f"strategy variable {x!r} is not quantified")
            theta = self.model.obs[agent].state_obs[s]
            key = (theta, action)
            table = scope.strategies[x]
            if key not in table:
                raise EncodingError(f"{x!r} has no entry for observable {theta!r} and action {action!r}")
            factors.append(table[key])
        return R.mul(*factors)

    # -- P terms -----------------------------------------------------------

    def eqn_prob(self, binding: Binding, phi: PathFormula, s: State, scope: _Scope, r_out: Var) -> Formula:
        model = self.model
        dra = self.engine.dra(phi)
        atoms = max_state_subformulas(phi)
        truths = {t: self.truth(t, scope) for t in model.states}
        tr_cache: Dict = {}

        def tr(t, q, q2):
            key = (t, q, q2)
            if key not in tr_cache:
                tr_cache[key] = tr_det(dra, q, q2, atoms, truths[t])
            return tr_cache[key]

        init = (s, dra.initial)
        vertices = [init]
        seen = {init}
        transitions: Dict = {}
        values: Dict = {}
        i = 0
        while i < len(vertices):
            t, q = vertices[i]
            i += 1
            for t2 in model.states:
                joints = [j for j in model.joint_actions if model.prob(t, j, t2) > 0]
                if not joints:
                    continue
                value = R.add(*(R.mul(R.const(model.prob(t, j, t2)), self.strategy_entry(scope, binding, t, j))
                                for j in joints))
                for q2 in dra.states:
                    f = tr(t, q, q2)
                    if f is R.FALSE:
                        continue
                    w = (t2, q2)
                    transitions[((t, q), w)] = f
                    values[((t, q), w)] = value
                    if w not in seen:
                        seen.add(w)
                        vertices.append(w)
        pairs = [(frozenset(v for v in vertices if v[1] in e), frozenset(v for v in vertices if v[1] in f))
                 for e, f in dra.acceptance]
        return self.chain_formula(_Chain(vertices, init, transitions, values, pairs, "rabin"), r_out)

    def chain_formula(self, chain: _Chain, r_out: Var) -> Formula:
        """∃ entries, solutions [Prod ∧ Sol ∧ r_out ≈ sol(initial)]."""
        entry: Dict = {}
        entry_vars: Dict = {}
        for key, tr in chain.transitions.items():
            value = chain.values[key]
            if isinstance(tr, R.BoolConst):
                if tr.value and isinstance(value, R.Num):
                    entry[key] = value
                    continue
                if not tr.value:
                    continue
            entry_vars[key] = entry[key] = self.ledger.fresh("edge", key)
        entry = {k: v for k, v in entry.items() if not (isinstance(v, R.Num) and v.value == 0)}
        prod_f = prod(entry_vars, chain.transitions, chain.values)
        edges = {k: R.gt(v, R.ZERO) for k, v in entry.items()}
        reach_f = self.reachability(chain.vertices, edges)
        goal_fn = goal_rabin if chain.kind == "rabin" else goal_streett
        goal = {v: goal_fn(v, chain.vertices, reach_f, chain.pairs) for v in chain.vertices}
        sol_vars = {v: self.ledger.fresh("sol", v) for v in chain.vertices}
        body = R.and_(prod_f, sol(chain.vertices, goal, reach_f, entry, sol_vars),
                      R.eq(r_out, sol_vars[chain.initial]))
        return R.exists(list(entry_vars.values()) + list(sol_vars.values()), body)

    def reachability(self, vertices: Sequence, edges: Mapping[Tuple, Formula]) -> Callable:
        """Reach_v^w as a function; constant edges are resolved outside the sentence."""
        may_succ: Dict = {v: [] for v in vertices}
        for (v, w), e in edges.items():
            if e is not R.FALSE:
                may_succ[v].append(w)
        constant = all(isinstance(e, R.BoolConst) for e in edges.values())
        memo: Dict = {}
        if constant:
            closure_of = {v: reachable([v], lambda u: may_succ[u]) for v in vertices}

            def reach_const(v, w):
                return R.top(w in closure_of[v])

            return reach_const
        may_reach = {v: reachable([v], lambda u: may_succ[u]) for v in vertices}
        marks = {v: self.ledger.fresh("mark", v) for v in vertices}
        cl = closure(marks, {k: e for k, e in edges.items() if e is not R.FALSE})

        def reach_marks(v, w):
            if v == w:
                return R.TRUE
            if w not in may_reach[v]:
                return R.FALSE
            if (v, w) not in memo:
                memo[(v, w)] = reach(marks, cl, v, w)
            return memo[(v, w)]

        return reach_marks

    # -- D terms -----------------------------------------------------------

    def eqn_degree(self, t: Degree, s: State, scope: _Scope, r_out: Var) -> Formula:
        phi = t.path
        atoms = max_state_subformulas(phi)
        if not all(is_propositional(h) for h in atoms):
            raise UnsupportedNesting("D-terms can only be encoded over propositional state subformulas")
        if t.agent not in self.model.agents:
            raise EncodingError(f"unknown agent {t.agent!r}")
        r_p = self.ledger.fresh("aux", "P", t)
        r_inv = self.ledger.fresh("aux", "P^-1", t)
        r_obs = self.ledger.fresh("aux", "obs", t)
        body = R.and_(
            self.eqn_prob(t.binding, phi, s, scope, r_p),
            self.eqn_obs(t, s, scope, r_obs),
            R.implies(R.ne(r_p, R.ZERO), R.and_(R.eq(R.mul(r_inv, r_p), R.ONE),
                                                 R.eq(r_out, R.mul(r_obs, r_inv)))),
            R.implies(R.eq(r_p, R.ZERO), R.eq(r_out, R.ONE)),
        )
        return R.exists([r_p, r_inv, r_obs], body)

    def _label(self, phi: PathFormula):
        return self.engine.labeller(phi, _EMPTY)

    def obs_automaton(self, s: State, agent: str, phi: PathFormula) -> Tuple[DetAutomaton, Callable]:
        """The Streett automaton for the B-construction and its transition formulas."""
        label = self._label(phi)
        dsa = self.engine.obs_dsa(s, agent, phi, label)
        if not self.internal_safra:
            return dsa, lambda y, letter, y2: R.top(dsa.step(y, letter) == y2)
        n0 = self.engine.nba(PNot(phi) if not isinstance(phi, PNot) else phi.arg)
        nba = trim_nba(build_obs_nba(self.model, s, agent, n0, label))
        budget = [self.internal_budget]
        cache: Dict = {}

        def tr_nba_model(letter):
            def f(x1, x2):
                return R.top(x2 in nba.successors(x1, letter))
            return f

        def tr_tree(y, letter, y2):
            key = (y, letter)
            if key not in cache:
                cache[key] = self._safra_transitions(y, letter, nba, tr_nba_model(letter), dsa.states, budget)
            return cache[key].get(y2, R.FALSE)

        return dsa, tr_tree

    def _safra_transitions(self, tree, letter, nba: NBA, tr_formula, targets, budget) -> Dict:
        """Tr over Safra trees as the disjunction over intermediary trees of Saf12 ∧ Saf3 ∧ Saf456."""
        t2 = steps_1_2(tree, nba)
        out: Dict = {}
        if t2 is None:
            candidates = [None]
        else:
            count = sum(1 for _ in nodes(t2))
            states = list(nba.states)
            subsets = [frozenset(c) for k in range(len(states) + 1) for c in itertools.combinations(states, k)]
            total = len(subsets) ** count
            budget[0] -= total
            if budget[0] < 0:
                raise EncodingBudgetExceeded(
                    f"internal Safra encoding needs {total} intermediary trees; budget exhausted"
                )
            candidates = (_replace_macros(t2, iter(combo)) for combo in itertools.product(subsets, repeat=count))
        for t3 in candidates:
            f3 = saf3(t2, t3, list(nba.states), tr_formula)
            if f3 is R.FALSE:
                continue
            for y2 in targets:
                f = R.and_(saf12(tree, nba, t2), f3, saf456(t3, y2))
                if f is not R.FALSE:
                    out[y2] = R.or_(out.get(y2, R.FALSE), f)
        return out

    def eqn_obs(self, t: Degree, s: State, scope: _Scope, r_out: Var) -> Formula:
        model = self.model
        phi = t.path
        label = self._label(phi)
        a_phi = lift_phi_dsa(model, s, self.engine.dsa(phi), label)
        obs_dsa, tr_obs = self.obs_automaton(s, t.agent, phi)
        init = (s, a_phi.initial, obs_dsa.initial)
        vertices = [init]
        seen = {init}
        transitions: Dict = {}
        values: Dict = {}
        trans_vars: List[Var] = []
        trans_parts: List[Formula] = []

        def tr_value(f: Formula, *index) -> Term:
            # r^{Tr,·} holds the truth value of a transition formula numerically
            if isinstance(f, R.BoolConst):
                return R.ONE if f.value else R.ZERO
            v = self.ledger.fresh("trans", *index)
            trans_vars.append(v)
            trans_parts.append(R.and_(R.implies(f, R.eq(v, R.ONE)), R.implies(R.not_(f), R.eq(v, R.ZERO))))
            return v

        i = 0
        while i < len(vertices):
            t1, x, y = vertices[i]
            i += 1
            grouped: Dict = {}
            for j in model.joint_actions:
                for t2 in model.successors(t1, j):
                    letter = (j, t2)
                    x2 = a_phi.step(x, letter)
                    y2s = [obs_dsa.step(y, letter)] if not self.internal_safra else [
                        y2 for y2 in obs_dsa.states if tr_obs(y, letter, y2) is not R.FALSE]
                    for y2 in y2s:
                        fa = R.top(a_phi.step(x, letter) == x2)
                        fb = tr_obs(y, letter, y2)
                        w = (t2, x2, y2)
                        term = R.mul(tr_value(fa, "A", x, letter, x2), tr_value(fb, "B", y, letter, y2),
                                     R.const(model.prob(t1, j, t2)), self.strategy_entry(scope, t.binding, t1, j))
                        grouped.setdefault(w, []).append(term)
            for w, terms in grouped.items():
                transitions[((t1, x, y), w)] = R.TRUE
                values[((t1, x, y), w)] = R.add(*terms)
                if w not in seen:
                    seen.add(w)
                    vertices.append(w)
        pairs = [(frozenset(v for v in vertices if (v[1], v[2]) in e),
                  frozenset(v for v in vertices if (v[1], v[2]) in f))
                 for e, f in _product_pairs(a_phi, obs_dsa)]
        body = self.chain_formula(_Chain(vertices, init, transitions, values, pairs, "streett"), r_out)
        return R.exists(trans_vars, R.and_(trans_parts, body))

    # -- ⊙ -----------------------------------------------------------------

    def full_obs(self, phi: FullObs, s: State, scope: _Scope) -> Formula:
        model = self.model
        if phi.agent not in model.agents:
            raise EncodingError(f"unknown agent {phi.agent!r}")
        path = phi.path
        a_pos = self.engine.nba(path)
        a_neg = self.engine.nba(PNot(path) if not isinstance(path, PNot) else path.arg)
        atoms = max_state_subformulas(path)
        truths = {t: self.truth(t, scope) for t in model.states}
        o = model.obs[phi.agent]
        moves = {t: [(j, t2, o.pair(j, t2)) for j in model.joint_actions for t2 in model.successors(t, j)]
                 for t in model.states}
        tr_cache: Dict = {}

        def tr(nba, t, q, q2):
            key = (id(nba), t, q, q2)
            if key not in tr_cache:
                tr_cache[key] = tr_nba(nba, q, q2, atoms, truths[t])
            return tr_cache[key]

        root = (XI, s, a_pos.initial, XI, s, a_neg.initial, 1)
        vertices = [root]
        seen = {root}
        edges: Dict = {}
        i = 0
        while i < len(vertices):
            v = vertices[i]
            i += 1
            _, s1, q1, _, s1p, q1p, b1 = v
            for q2 in a_pos.states:
                f_pos = tr(a_pos, s1, q1, q2)
                if f_pos is R.FALSE:
                    continue
                for q2p in a_neg.states:
                    f_neg = tr(a_neg, s1p, q1p, q2p)
                    if f_neg is R.FALSE:
                        continue
                    for j, s2, ob in moves[s1]:
                        for jp, s2p, obp in moves[s1p]:
                            b2 = b1 if ob == obp else 0
                            w = (j, s2, q2, jp, s2p, q2p, b2)
                            # both model moves hold by choice of (j, s2) and (jp, s2p)
                            edges[(v, w)] = edge(f_pos, f_neg, R.TRUE, R.TRUE,
                                                 R.top(ob != obp or b2 == b1), R.top(ob == obp or b2 == 0))
                            if w not in seen:
                                seen.add(w)
                                vertices.append(w)
        accepting = [v for v in vertices if v[2] in a_pos.accepting and v[5] in a_neg.accepting and v[6] == 1]
        if all(isinstance(e, R.BoolConst) for e in edges.values()):
            succ: Dict = {v: [] for v in vertices}
            for (v, w), e in edges.items():
                if e.value:
                    succ[v].append(w)
            bad = False
            for comp in tarjan_scc([root], lambda u: succ[u]):
                if any(u in accepting for u in comp) and has_cycle_through(comp, lambda u: succ[u]):
                    bad = True
                    break
            return R.top(not bad)
        reach_f = self.reachability(vertices, edges)
        out_edges: Dict = {}
        for (v, w), e in edges.items():
            out_edges.setdefault(v, []).append((w, e))
        witness = R.or_([
            R.and_(reach_f(root, v), R.or_([R.and_(e, reach_f(w, v)) for w, e in out_edges.get(v, [])]))
            for v in accepting
        ])
        return R.not_(witness)


def _product_pairs(a: DetAutomaton, b: DetAutomaton):
    qa, qb = frozenset(a.states), frozenset(b.states)
    for e, f in a.acceptance:
        yield frozenset((x, y) for x in e for y in qb), frozenset((x, y) for x in f for y in qb)
    for e, f in b.acceptance:
        yield frozenset((x, y) for x in qa for y in e), frozenset((x, y) for x in qa for y in f)


_EMPTY = Valuation()


def encode(model: Pomas, s: State, phi: HistoryFormula, **kw) -> Encoding:
    return Encoder(model, **kw).encode(s, phi)
