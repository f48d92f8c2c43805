"""Product Markov chains, terminal SCC classification and exact reachability."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Mapping, Set, Tuple

from .graphs import reachable, tarjan_scc


class SingularSystemError(ArithmeticError):
    """Exact elimination met a dependent system; should never happen for valid chains."""


@dataclass(frozen=True, eq=False)
class ProductChain:
    """Finite Markov chain whose states carry an automaton component.

    ``acceptance`` holds pairs of sets of automaton states; ``project`` maps a
    chain state to its automaton component. ``kind`` is rabin or streett.
    """

    states: Tuple
    kernel: Mapping[Hashable, Mapping[Hashable, Fraction]]
    initial: Hashable
    acceptance: Tuple[Tuple[FrozenSet, FrozenSet], ...]
    kind: str
    project: Callable = lambda v: v[1]

    def successors(self, v) -> Iterable:
        return (w for w, p in self.kernel[v].items() if p > 0)


def explore_chain(initial, step: Callable[[Hashable], Mapping[Hashable, Fraction]]) -> Tuple[Tuple, Dict]:
    """Reachable part of a chain given by a row function."""
    order = [initial]
    seen = {initial}
    kernel: Dict = {}
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        row = {w: p for w, p in step(v).items() if p != 0}
        kernel[v] = row
        for w in row:
            if w not in seen:
                seen.add(w)
                order.append(w)
    return tuple(order), kernel


@dataclass(frozen=True)
class TsccClassification:
    components: Tuple[FrozenSet, ...]
    terminal: Tuple[bool, ...]
    accepting: Tuple[bool, ...]

    def component_of(self) -> Dict:
        return {v: k for k, comp in enumerate(self.components) for v in comp}

    def goal_states(self) -> FrozenSet:
        return frozenset(v for comp, acc in zip(self.components, self.accepting) if acc for v in comp)


def _component_accepts(chain: ProductChain, comp: FrozenSet) -> bool:
    autos = {chain.project(v) for v in comp}
    if chain.kind == "rabin":
        return any(not (autos & e) and bool(autos & f) for e, f in chain.acceptance)
    return all(not (autos & e) or bool(autos & f) for e, f in chain.acceptance)


def classify_tsccs(chain: ProductChain) -> TsccClassification:
    comps = [frozenset(c) for c in tarjan_scc(chain.states, chain.successors)]
    terminal = []
    accepting = []
    for comp in comps:
        term = all(w in comp for v in comp for w in chain.successors(v))
        terminal.append(term)
        accepting.append(term and _component_accepts(chain, comp))
    return TsccClassification(tuple(comps), tuple(terminal), tuple(accepting))


@dataclass(frozen=True)
class ReachabilitySolution:
    values: Mapping[Hashable, Fraction]

    def __getitem__(self, v) -> Fraction:
        return self.values[v]


def _pivot_key(q: Fraction):
    return (abs(q), -q.denominator)


def solve_linear(rows: List[Dict[int, Fraction]], rhs: List[Fraction], n: int) -> List[Fraction]:
    """Solve a square sparse system exactly by Gauss-Jordan elimination.

    The pivot is the entry of largest magnitude in the column, ties going to
    the smaller denominator.
    """
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    pivot_row_of: Dict[int, int] = {}
    used: Set[int] = set()
    for col in range(n):
        candidates = [r for r in range(len(rows)) if r not in used and rows[r].get(col, 0) != 0]
        if not candidates:
            raise SingularSystemError(f"no pivot for column {col}")
        pr = max(candidates, key=lambda r: _pivot_key(rows[r][col]))
        used.add(pr)
        pivot_row_of[col] = pr
        pivot = rows[pr][col]
        prow = {c: v / pivot for c, v in rows[pr].items()}
        prhs = rhs[pr] / pivot
        rows[pr], rhs[pr] = prow, prhs
        for r in range(len(rows)):
            if r == pr:
                continue
            factor = rows[r].get(col)
            if not factor:
                continue
            row = rows[r]
            for c, v in prow.items():
                nv = row.get(c, 0) - factor * v
                if nv:
                    row[c] = nv
                else:
                    row.pop(c, None)
            rhs[r] -= factor * prhs
    return [rhs[pivot_row_of[c]] for c in range(n)]


def solve_reachability(chain: ProductChain, classification: TsccClassification) -> ReachabilitySolution:
    """Probability of eventually entering an accepting terminal SCC, exactly.

    Goal states get 1, states that cannot reach a goal get 0, the remaining
    states satisfy ``p_v = sum_w P(v, w) p_w``; the system is solved one SCC at
    a time in reverse topological order and then checked by substitution.
    """
    goal = classification.goal_states()
    preds: Dict = {}
    for v in chain.states:
        for w in chain.successors(v):
            preds.setdefault(w, set()).add(v)
    can_reach = reachable(goal, lambda w: preds.get(w, ()))
    values: Dict = {}
    for v in chain.states:
        if v in goal:
            values[v] = Fraction(1)
        elif v not in can_reach:
            values[v] = Fraction(0)
    # components come out of Tarjan sinks first, which is the order we need
    for comp in classification.components:
        unknown = [v for v in comp if v not in values]
        if not unknown:
            continue
        index = {v: k for k, v in enumerate(unknown)}
        rows = []
        rhs = []
        for v in unknown:
            row = {index[v]: Fraction(1)}
            const = Fraction(0)
            for w, p in chain.kernel[v].items():
                if w in index:
                    row[index[w]] = row.get(index[w], 0) - p
                else:
                    const += p * values[w]
            rows.append({c: x for c, x in row.items() if x})
            rhs.append(const)
        for v, x in zip(unknown, solve_linear(rows, rhs, len(unknown))):
            values[v] = x
    for v in chain.states:
        if v in goal or v not in can_reach:
            continue
        total = sum((p * values[w] for w, p in chain.kernel[v].items()), Fraction(0))
        if total != values[v]:
            raise SingularSystemError(f"residual at {v!r}")
    return ReachabilitySolution(values)
