"""JSON readers/writers for models and strategies.

Model documents look like::

    {"agents": ["1", "2"],
     "states": ["s0", "s1"],
     "actions": {"1": ["send", "wait"], "2": ["copy", "wait"]},
     "transitions": [{"from": "s0", "action": ["send", "copy"], "to": "s1", "prob": "1/10"}],
     "labels": {"s1": ["stolen"]},
     "observations": {"1": {"stateObs": {"s0": "init"},
                            "actionObs": {"send,copy": "(send,ε)"}}}}

Probabilities are strings holding either ``num/den`` or a decimal literal.
"""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, Mapping, Union

from .model import MemorylessStrategy, Observation, Pomas

PathLike = Union[str, Path]


def parse_prob(value) -> Fraction:
    if isinstance(value, bool):
        raise ValueError(f"not a probability: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        # floats are accepted only through their shortest decimal repr
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def format_fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def _joint_key(key: str):
    return tuple(part.strip() for part in key.split(","))


def model_from_dict(doc: Mapping) -> Pomas:
    agents = tuple(str(a) for a in doc["agents"])
    states = tuple(doc["states"])
    raw_actions = doc["actions"]
    if isinstance(raw_actions, list):
        actions = {a: tuple(raw_actions) for a in agents}
    else:
        actions = {str(a): tuple(raw_actions[a]) for a in raw_actions}
    transition: Dict = {}
    for entry in doc["transitions"]:
        joint = tuple(entry["action"]) if isinstance(entry["action"], list) else _joint_key(entry["action"])
        row = transition.setdefault((entry["from"], joint), {})
        row[entry["to"]] = row.get(entry["to"], Fraction(0)) + parse_prob(entry["prob"])
    labels = {s: frozenset(doc.get("labels", {}).get(s, ())) for s in states}
    obs = {}
    for agent, entry in doc.get("observations", {}).items():
        obs[str(agent)] = Observation(
            state_obs=dict(entry.get("stateObs", {})),
            action_obs={_joint_key(k): v for k, v in entry.get("actionObs", {}).items()},
        )
    return Pomas(agents, states, actions, transition, labels, obs)


def model_to_dict(model: Pomas) -> Dict:
    transitions = []
    for (s, joint), row in model.transition.items():
        for t, p in row.items():
            transitions.append({"from": s, "action": list(joint), "to": t, "prob": format_fraction(p)})
    return {
        "agents": list(model.agents),
        "states": list(model.states),
        "actions": {a: list(model.actions[a]) for a in model.agents},
        "transitions": transitions,
        "labels": {s: sorted(model.labels[s]) for s in model.states},
        "observations": {
            a: {
                "stateObs": dict(model.obs[a].state_obs),
                "actionObs": {",".join(j): v for j, v in model.obs[a].action_obs.items()},
            }
            for a in model.agents
            if a in model.obs
        },
    }


def load_model(path: PathLike) -> Pomas:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def strategies_from_dict(doc: Mapping) -> Dict[str, MemorylessStrategy]:
    return {
        str(key): MemorylessStrategy(
            {theta: {a: parse_prob(p) for a, p in row.items()} for theta, row in table.items()}
        )
        for key, table in doc.items()
    }


def load_strategies(path: PathLike) -> Dict[str, MemorylessStrategy]:
    """Strategy file: ``{key: {stateObservable: {action: "num/den"}}}``.

    Keys are agent ids or variable names; the caller decides how to bind them.
    """
    with open(path, encoding="utf-8") as fh:
        return strategies_from_dict(json.load(fh))


def model_hash(model: Pomas) -> str:
    blob = json.dumps(model_to_dict(model), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
