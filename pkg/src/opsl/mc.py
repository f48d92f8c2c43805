"""Monte-Carlo estimates of P and D values, used as a statistical cross-check.

Paths are sampled in bulk with numpy's Philox counter-based generator. A
formula is evaluated on the lasso obtained once a path sits in an absorbing
state, so only models whose sampled paths get absorbed within the horizon
are supported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .automata import LassoWord
from .engine import engine_for
from .logic import PathFormula, PNot, Valuation
from .ltl import evaluate_lasso
from .model import History, Pomas, State, StrategyProfile, absorbing_states, joint_action_prob

RNG_NAME = "numpy.random.Philox"


class HorizonInsufficient(RuntimeError):
    pass


class ClassExplosion(RuntimeError):
    pass


@dataclass(frozen=True)
class McConfig:
    samples: int = 100_000
    horizon: int = 20
    seed: int = 0
    mode: str = "prob"
    node_budget: int = 200_000

    def __post_init__(self):
        if self.samples < 1 or self.horizon < 1:
            raise ValueError("samples and horizon must be positive")
        if self.mode not in ("prob", "degree"):
            raise ValueError("mode is prob or degree")


@dataclass(frozen=True)
class McResult:
    estimate: float
    stderr: float
    samples: int
    hits: int
    mode: str
    seed: int
    rng: str = RNG_NAME

    def as_dict(self) -> Dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "samples": self.samples,
                "hits": self.hits, "mode": self.mode, "seed": self.seed, "rng": self.rng}


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


class _Sampler:
    """Outcome tables of the induced chain: per state, (joint, successor) pairs."""

    def __init__(self, model: Pomas, profile: StrategyProfile):
        self.model = model
        self.index = {s: k for k, s in enumerate(model.states)}
        self.outcomes: List[List[Tuple]] = []
        for s in model.states:
            outs = []
            for j in model.joint_actions:
                w = joint_action_prob(model, profile, s, j)
                if w == 0:
                    continue
                for t, p in model.transition[(s, j)].items():
                    if p:
                        outs.append((j, t, w * p))
            self.outcomes.append(outs)
        width = max(len(o) for o in self.outcomes)
        cum = np.full((len(model.states), width), 2.0)
        self.next_state = np.zeros((len(model.states), width), dtype=np.int64)
        self.joint = np.zeros((len(model.states), width), dtype=np.int64)
        self.joints = list(model.joint_actions)
        jindex = {j: k for k, j in enumerate(self.joints)}
        for k, outs in enumerate(self.outcomes):
            acc = Fraction(0)
            for m, (j, t, p) in enumerate(outs):
                acc += p
                cum[k, m] = float(acc)
                self.next_state[k, m] = self.index[t]
                self.joint[k, m] = jindex[j]
            if outs:
                cum[k, len(outs) - 1] = 1.0  # guard against rounding
        self.cum = cum

    def run(self, s: State, n: int, horizon: int, rng: np.random.Generator):
        states = np.empty((n, horizon + 1), dtype=np.int64)
        joints = np.empty((n, horizon), dtype=np.int64)
        states[:, 0] = self.index[s]
        for k in range(horizon):
            cur = states[:, k]
            u = rng.random(n)
            pick = (u[:, None] >= self.cum[cur]).sum(axis=1)
            states[:, k + 1] = self.next_state[cur, pick]
            joints[:, k] = self.joint[cur, pick]
        return states, joints


def sample_path(model: Pomas, s: State, profile: StrategyProfile, horizon: int,
                rng: np.random.Generator) -> History:
    """One path of ``horizon`` steps of the induced chain."""
    sampler = _Sampler(model, profile)
    states, joints = sampler.run(s, 1, horizon, rng)
    return History(tuple(model.states[k] for k in states[0]), tuple(sampler.joints[k] for k in joints[0]))


def _absorbed_word(model: Pomas, states_row, absorbing_idx: set, label) -> Optional[LassoWord]:
    for k, idx in enumerate(states_row):
        if idx in absorbing_idx:
            prefix = tuple(label(model.states[i]) for i in states_row[:k])
            return LassoWord(prefix, (label(model.states[idx]),))
    return None


def estimate(model: Pomas, s: State, phi: PathFormula, profile: StrategyProfile, cfg: McConfig,
             agent: Optional[str] = None, label: Optional[Callable] = None) -> McResult:
    """Estimate P(phi) or, in degree mode, D_agent(phi) from sampled paths."""
    if label is None:
        label = engine_for(model).labeller(phi, Valuation())
    rng = make_rng(cfg.seed)
    sampler = _Sampler(model, profile)
    states, joints = sampler.run(s, cfg.samples, cfg.horizon, rng)
    absorbing = {sampler.index[a] for a in absorbing_states(model)}
    is_abs = np.zeros(len(model.states), dtype=bool)
    is_abs[list(absorbing)] = True
    hit = is_abs[states]
    if not hit[:, -1].all():
        missing = int((~hit[:, -1]).sum())
        raise HorizonInsufficient(f"{missing} of {cfg.samples} paths not absorbed within {cfg.horizon} steps")
    cut = hit.argmax(axis=1)
    cols = np.arange(states.shape[1])
    truncated = np.where(cols[None, :] > cut[:, None], -1, states)
    keys, inverse = np.unique(truncated, axis=0, return_inverse=True)
    key_sat = np.array([
        evaluate_lasso(phi, _absorbed_word(model, [i for i in key if i >= 0], absorbing, label))
        for key in keys
    ], dtype=bool)
    sat = key_sat[inverse.reshape(-1)]
    n = cfg.samples
    if cfg.mode == "prob":
        hits = int(sat.sum())
        p = hits / n
        return McResult(p, math.sqrt(p * (1 - p) / n), n, hits, "prob", cfg.seed)
    if agent is None:
        raise ValueError("degree mode needs an agent")
    oracle = _WitnessSearch(model, s, agent, PNot(phi), label, cfg.horizon, absorbing, cfg.node_budget)
    total = int(sat.sum())
    if total == 0:
        return McResult(float("nan"), float("nan"), n, 0, "degree", cfg.seed)
    rows = np.concatenate([states[sat], joints[sat]], axis=1)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    h = cfg.horizon
    cache: Dict[Tuple, bool] = {}
    good = 0
    for row, c in zip(uniq, counts):
        word = oracle.word(row[:h + 1], row[h + 1:], sampler)
        if word not in cache:
            cache[word] = oracle.has_witness(word)
        if not cache[word]:
            good += int(c)
    d = good / total
    return McResult(d, math.sqrt(d * (1 - d) / total), n, good, "degree", cfg.seed)


class _WitnessSearch:
    """Is there a history with the same observations that ends absorbed and satisfies ``neg``?"""

    def __init__(self, model, s, agent, neg, label, horizon, absorbing, budget):
        self.model, self.s, self.neg, self.label = model, s, neg, label
        self.o = model.obs[agent]
        self.horizon = horizon
        self.absorbing = {model.states[i] for i in absorbing}
        self.budget = budget
        self.moves = {
            t: [(j, t2) for j in model.joint_actions for t2 in model.successors(t, j)]
            for t in model.states
        }

    def word(self, states_row, joints_row, sampler) -> Tuple:
        m = self.model
        return tuple(self.o.pair(sampler.joints[j], m.states[t]) for j, t in zip(joints_row, states_row[1:]))

    def has_witness(self, word: Tuple) -> bool:
        expanded = 0
        stack = [(self.s, (self.s,), 0)]
        while stack:
            t, path, k = stack.pop()
            expanded += 1
            if expanded > self.budget:
                raise ClassExplosion(f"witness search exceeded {self.budget} nodes")
            if k == len(word):
                if t in self.absorbing and self._sat(path):
                    return True
                continue
            for j, t2 in self.moves[t]:
                if self.o.pair(j, t2) == word[k]:
                    stack.append((t2, path + (t2,), k + 1))
        return False

    def _sat(self, path) -> bool:
        first = next(k for k, t in enumerate(path) if t in self.absorbing)
        w = LassoWord(tuple(self.label(t) for t in path[:first]), (self.label(path[first]),))
        return evaluate_lasso(self.neg, w)
