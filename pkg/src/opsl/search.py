"""Strategy quantifiers decided over a finite grid of memoryless strategies.

This is an under-approximation of ``exists`` (and hence not sound under
negation); it serves as an independent check of the real-arithmetic encoding
and as a convenience for exploring small models.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Dict, Iterator, List, Sequence, Tuple

from .engine import Engine, EngineError
from .logic import Exists, HistoryFormula, Valuation, bindings
from .model import MemorylessStrategy, Pomas

DEFAULT_STEP = Fraction(1, 20)
DEFAULT_LIMIT = 200_000


class SearchTooLarge(EngineError):
    pass


def grid_distributions(actions: Sequence, step: Fraction = DEFAULT_STEP) -> List[Dict]:
    """All distributions over ``actions`` whose entries are multiples of ``step``."""
    n = int(1 / step)
    if Fraction(1, n) != step:
        raise ValueError("step must be 1/n")
    out = []
    k = len(actions)
    for cut in itertools.combinations(range(n + k - 1), k - 1):
        parts = []
        prev = -1
        for c in cut + (n + k - 1,):
            parts.append(c - prev - 1)
            prev = c
        out.append({a: Fraction(m, n) for a, m in zip(actions, parts) if m})
    return out


def grid_strategies(observables: Sequence[str], actions: Sequence, step: Fraction = DEFAULT_STEP
                    ) -> Iterator[MemorylessStrategy]:
    dists = grid_distributions(actions, step)
    observables = sorted(observables)
    for rows in itertools.product(dists, repeat=len(observables)):
        yield MemorylessStrategy(dict(zip(observables, rows)))


def variable_domain(model: Pomas, body: HistoryFormula, var: str) -> Tuple[Tuple[str, ...], Tuple]:
    """State observables and actions a strategy for ``var`` must cover.

    Every agent bound to ``var`` must have the same action set.
    """
    agents = sorted({a for b in bindings(body) for a in model.agents
                     if b.covers([a]) and b.variable(a) == var})
    if not agents:
        agents = list(model.agents)
    action_sets = {tuple(model.actions[a]) for a in agents}
    if len(action_sets) != 1:
        raise EngineError(f"agents {agents} bound to {var!r} have different action sets")
    # only observables some state produces; a strategy is never asked about others
    observables = sorted(set().union(*(model.obs[a].state_obs.values() for a in agents)))
    return tuple(observables), action_sets.pop()


class GridEngine(Engine):
    """Concrete engine that reads ``exists`` as a search over grid strategies."""

    def __init__(self, model: Pomas, step: Fraction = DEFAULT_STEP, limit: int = DEFAULT_LIMIT, **kw):
        super().__init__(model, **kw)
        self.step = step
        self.limit = limit
        self.witness: Dict[str, MemorylessStrategy] = {}

    def holds(self, s, phi, nu: Valuation) -> bool:
        if not isinstance(phi, Exists):
            return super().holds(s, phi, nu)
        observables, actions = variable_domain(self.model, phi.body, phi.var)
        size = len(grid_distributions(actions, self.step)) ** len(observables)
        if size > self.limit:
            raise SearchTooLarge(f"{size} grid strategies for {phi.var!r} exceed {self.limit}")
        for sigma in grid_strategies(observables, actions, self.step):
            if self.holds(s, phi.body, nu.extend(phi.var, sigma)):
                self.witness[phi.var] = sigma
                return True
        return False
