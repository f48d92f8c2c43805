"""Partially observable stochastic multi-agent systems.

Probabilities are kept as :class:`fractions.Fraction` throughout so that
downstream comparisons against 0 and 1 are exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

EPSILON = "ε"  # invisible action observable
CIRCLE = "∘"  # invisible state observable

State = str
Agent = str
Action = str
JointAction = Tuple[Action, ...]
Distribution = Dict[State, Fraction]


class ModelError(Exception):
    pass


class UndefinedObservableError(ModelError):
    """A strategy has no entry for a state observable the model produces."""


@dataclass(frozen=True)
class Observation:
    """Observation function of a single agent."""

    state_obs: Mapping[State, str]
    action_obs: Mapping[JointAction, str]

    def pair(self, joint: JointAction, state: State) -> Tuple[str, str]:
        return (self.action_obs[joint], self.state_obs[state])


@dataclass(frozen=True, eq=False)
class Pomas:
    agents: Tuple[Agent, ...]
    states: Tuple[State, ...]
    actions: Mapping[Agent, Tuple[Action, ...]]
    transition: Mapping[Tuple[State, JointAction], Distribution]
    labels: Mapping[State, FrozenSet[str]]
    obs: Mapping[Agent, Observation]

    @property
    def joint_actions(self) -> List[JointAction]:
        return list(itertools.product(*(self.actions[a] for a in self.agents)))

    @property
    def propositions(self) -> FrozenSet[str]:
        return frozenset().union(*self.labels.values()) if self.labels else frozenset()

    def prob(self, s: State, joint: JointAction, t: State) -> Fraction:
        return self.transition.get((s, joint), {}).get(t, Fraction(0))

    def successors(self, s: State, joint: JointAction) -> Iterator[State]:
        for t, p in self.transition.get((s, joint), {}).items():
            if p > 0:
                yield t

    def state_observables(self, agent: Agent) -> FrozenSet[str]:
        return frozenset(self.obs[agent].state_obs.values()) | {CIRCLE}

    def action_observables(self, agent: Agent) -> FrozenSet[str]:
        return frozenset(self.obs[agent].action_obs.values()) | {EPSILON}

    def agent_index(self, agent: Agent) -> int:
        return self.agents.index(agent)


@dataclass(frozen=True)
class History:
    """Finite alternating sequence ``s0 a0 s1 ... sn``."""

    states: Tuple[State, ...]
    actions: Tuple[JointAction, ...] = ()

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("a history has exactly one more state than joint actions")

    @property
    def last(self) -> State:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.actions)

    def extend(self, joint: JointAction, state: State) -> "History":
        return History(self.states + (state,), self.actions + (joint,))

    def steps(self) -> Iterator[Tuple[State, JointAction, State]]:
        for k, joint in enumerate(self.actions):
            yield self.states[k], joint, self.states[k + 1]


@dataclass(frozen=True)
class LassoPath:
    """Ultimately periodic path ``prefix . loop^omega``.

    ``loop`` is a nonempty sequence of (joint action, state) pairs appended
    after the last state of ``prefix``.
    """

    prefix: History
    loop: Tuple[Tuple[JointAction, State], ...]

    def __post_init__(self):
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    def steps(self) -> Iterator[Tuple[State, JointAction, State]]:
        """Every transition of the infinite path, each listed once."""
        yield from self.prefix.steps()
        prev = self.prefix.last
        for joint, t in self.loop:
            yield prev, joint, t
            prev = t
        yield prev, self.loop[0][0], self.loop[0][1]


class MemorylessStrategy(Mapping[str, Mapping[Action, Fraction]]):
    """Map from state observables to distributions over one agent's actions.

    Immutable and hashable so it can take part in cache keys.
    """

    def __init__(self, table: Mapping[str, Mapping[Action, object]]):
        self._table = {
            theta: {a: Fraction(p) for a, p in row.items()} for theta, row in table.items()
        }
        self._key = tuple(
            sorted((theta, tuple(sorted(row.items()))) for theta, row in self._table.items())
        )

    def __getitem__(self, theta):
        return self._table[theta]

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def __hash__(self):
        return hash(self._key)

    def __eq__(self, other):
        if isinstance(other, MemorylessStrategy):
            return self._key == other._key
        return NotImplemented

    def __repr__(self):
        return f"MemorylessStrategy({self._table!r})"

    def prob(self, theta: str, action: Action) -> Fraction:
        try:
            row = self._table[theta]
        except KeyError:
            raise UndefinedObservableError(f"strategy undefined on observable {theta!r}") from None
        return row.get(action, Fraction(0))

    @classmethod
    def uniform(cls, observables: Iterable[str], actions: Sequence[Action]) -> "MemorylessStrategy":
        p = Fraction(1, len(actions))
        return cls({theta: {a: p for a in actions} for theta in observables})


StrategyProfile = Mapping[Agent, MemorylessStrategy]


@dataclass(frozen=True, eq=False)
class InducedChain:
    states: Tuple[State, ...]
    kernel: Mapping[State, Distribution]

    def row(self, s: State) -> Distribution:
        return self.kernel[s]

    def __call__(self, s: State, t: State) -> Fraction:
        return self.kernel[s].get(t, Fraction(0))


def validate(model: Pomas) -> List[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems: List[str] = []
    states = set(model.states)
    joints = model.joint_actions
    for s in model.states:
        for joint in joints:
            where = f"({s},({','.join(joint)}))"
            row = model.transition.get((s, joint))
            if row is None:
                problems.append(f"missing transition row at {where}")
                continue
            for t, p in row.items():
                if t not in states:
                    problems.append(f"unknown target state {t!r} at {where}")
                if not 0 <= p <= 1:
                    problems.append(f"probability {p} out of [0,1] at {where} -> {t}")
            total = sum(row.values(), Fraction(0))
            if total != 1:
                problems.append(f"row-sum violation at {where}: sums to {total}")
    for key in model.transition:
        s, joint = key
        if s not in states or joint not in joints:
            problems.append(f"transition row for unknown state/action {key!r}")
    for s in model.states:
        if s not in model.labels:
            problems.append(f"missing label entry for {s}")
    for agent in model.agents:
        o = model.obs.get(agent)
        if o is None:
            problems.append(f"totality violation: no observation function for agent {agent}")
            continue
        for s in model.states:
            if s not in o.state_obs:
                problems.append(f"totality violation: agent {agent} has no state observable for {s}")
        for joint in joints:
            if joint not in o.action_obs:
                problems.append(
                    f"totality violation: agent {agent} has no action observable for ({','.join(joint)})"
                )
    return problems


def induce_chain(model: Pomas, profile: StrategyProfile) -> InducedChain:
    """Markov chain obtained by fixing a memoryless strategy profile."""
    kernel: Dict[State, Distribution] = {}
    joints = model.joint_actions
    for s in model.states:
        row: Distribution = {}
        for joint in joints:
            weight = joint_action_prob(model, profile, s, joint)
            if weight == 0:
                continue
            for t, p in model.transition[(s, joint)].items():
                if p:
                    row[t] = row.get(t, Fraction(0)) + p * weight
        kernel[s] = row
    return InducedChain(model.states, kernel)


def joint_action_prob(model: Pomas, profile: StrategyProfile, s: State, joint: JointAction) -> Fraction:
    """Probability that the agents jointly pick ``joint`` at ``s``."""
    weight = Fraction(1)
    for agent, a in zip(model.agents, joint):
        theta = model.obs[agent].state_obs[s]
        weight *= profile[agent].prob(theta, a)
        if weight == 0:
            break
    return weight


def observe(model: Pomas, agent: Agent, h: History) -> Tuple[str, ...]:
    """Observation word ``ε obsS(s0) obsA(a0) obsS(s1) ...`` of a history."""
    o = model.obs[agent]
    word = [EPSILON, o.state_obs[h.states[0]]]
    for joint, t in zip(h.actions, h.states[1:]):
        word.append(o.action_obs[joint])
        word.append(o.state_obs[t])
    return tuple(word)


def cone_probability(model: Pomas, profile: StrategyProfile, h: History) -> Fraction:
    p = Fraction(1)
    for s, joint, t in h.steps():
        p *= model.prob(s, joint, t) * joint_action_prob(model, profile, s, joint)
        if p == 0:
            break
    return p


def is_valid_history(model: Pomas, h: History) -> bool:
    return all(model.prob(s, joint, t) > 0 for s, joint, t in h.steps())


def is_valid_lasso(model: Pomas, p: LassoPath) -> bool:
    return all(model.prob(s, joint, t) > 0 for s, joint, t in p.steps())


def _lasso_observables(model: Pomas, agent: Agent, p: LassoPath):
    o = model.obs[agent]
    head = [(EPSILON, o.state_obs[p.prefix.states[0]])]
    head += [o.pair(joint, t) for joint, t in zip(p.prefix.actions, p.prefix.states[1:])]
    loop = [o.pair(joint, t) for joint, t in p.loop]
    return head, loop


def obs_equivalent(model: Pomas, agent: Agent, p: LassoPath, q: LassoPath) -> bool:
    """Whether two lassos yield the same infinite observation word."""
    head1, loop1 = _lasso_observables(model, agent, p)
    head2, loop2 = _lasso_observables(model, agent, q)
    horizon = len(head1) + len(head2) + math.lcm(len(loop1), len(loop2))

    def at(head, loop, k):
        return head[k] if k < len(head) else loop[(k - len(head)) % len(loop)]

    return all(at(head1, loop1, k) == at(head2, loop2, k) for k in range(horizon))


def absorbing_states(model: Pomas) -> FrozenSet[State]:
    """States that loop to themselves with probability 1 under every joint action."""
    joints = model.joint_actions
    return frozenset(
        s for s in model.states if all(model.prob(s, joint, s) == 1 for joint in joints)
    )


def build_model(
    agents: Sequence[Agent],
    states: Sequence[State],
    actions: Mapping[Agent, Sequence[Action]],
    transition: Mapping[Tuple[State, JointAction], Mapping[State, object]],
    labels: Mapping[State, Iterable[str]],
    obs: Optional[Mapping[Agent, Observation]] = None,
) -> Pomas:
    """Convenience constructor; agents without an observation function see perfectly."""
    agents = tuple(agents)
    acts = {a: tuple(actions[a]) for a in agents}
    trans = {
        (s, tuple(joint)): {t: Fraction(p) for t, p in row.items()}
        for (s, joint), row in transition.items()
    }
    observations = dict(obs or {})
    joints = list(itertools.product(*(acts[a] for a in agents)))
    for agent in agents:
        if agent not in observations:
            observations[agent] = perfect_observation(states, joints)
    return Pomas(
        agents=agents,
        states=tuple(states),
        actions=acts,
        transition=trans,
        labels={s: frozenset(labels.get(s, ())) for s in states},
        obs=observations,
    )


def perfect_observation(states: Iterable[State], joints: Iterable[JointAction]) -> Observation:
    return Observation(
        state_obs={s: s for s in states},
        action_obs={j: "(" + ",".join(j) + ")" for j in joints},
    )
