"""Safra's determinisation of Büchi automata into Rabin automata.

Trees are immutable nested tuples so they can serve directly as DRA states::

    node = (name, macrostate, marked, children)

and the empty tree is ``None``. Node names come from ``{1, ..., 2n}`` where
``n`` is the number of NBA states; freed names are reused smallest-first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

from .automata import NBA, DRA, DetAutomaton, StateBudgetExceeded

DEFAULT_BUDGET = 200_000

SafraNode = Tuple[int, FrozenSet, bool, tuple]
SafraTree = Optional[SafraNode]


class SafraInvariantError(AssertionError):
    pass


@dataclass
class _Work:
    name: int
    macro: set
    mark: bool = False
    children: List["_Work"] = field(default_factory=list)

    def walk(self) -> Iterator["_Work"]:
        yield self
        for c in self.children:
            yield from c.walk()


def _thaw(node: SafraNode) -> _Work:
    name, macro, mark, children = node
    return _Work(name, set(macro), mark, [_thaw(c) for c in children])


def _freeze(w: _Work) -> SafraNode:
    return (w.name, frozenset(w.macro), w.mark, tuple(_freeze(c) for c in w.children))


def nodes(tree: SafraTree) -> Iterator[SafraNode]:
    if tree is None:
        return
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node[3]))


def node_names(tree: SafraTree) -> FrozenSet[int]:
    return frozenset(n[0] for n in nodes(tree))


def marked_names(tree: SafraTree) -> FrozenSet[int]:
    return frozenset(n[0] for n in nodes(tree) if n[2])


def initial_tree(nba: NBA) -> SafraTree:
    return (1, frozenset([nba.initial]), False, ())


def check_tree(tree: SafraTree, vocabulary: int) -> None:
    """Raise :class:`SafraInvariantError` unless ``tree`` is a well-formed Safra tree."""
    if tree is None:
        return
    names = [n[0] for n in nodes(tree)]
    if len(set(names)) != len(names):
        raise SafraInvariantError(f"duplicate node names in {tree!r}")
    if any(not 1 <= v <= vocabulary for v in names):
        raise SafraInvariantError(f"node name outside 1..{vocabulary}")
    for name, macro, _, children in nodes(tree):
        if not macro:
            raise SafraInvariantError(f"node {name} has an empty macrostate")
        union = frozenset().union(*(c[1] for c in children)) if children else frozenset()
        if not union <= macro:
            raise SafraInvariantError(f"children of node {name} hold states outside it")
        if not macro - union:
            raise SafraInvariantError(f"node {name} owns no state of its own")
        for k, c in enumerate(children):
            for d in children[k + 1:]:
                if c[1] & d[1]:
                    raise SafraInvariantError(f"siblings {c[0]} and {d[0]} overlap")


# The six steps are split so that the encoder can reuse the intermediary trees.

def steps_1_2(tree: SafraTree, nba: NBA) -> SafraTree:
    """Unmark every node, then give each node meeting F a new last child."""
    if tree is None:
        return None
    root = _thaw(tree)
    existing = list(root.walk())
    used = {w.name for w in existing}
    for w in existing:
        w.mark = False
    free = (v for v in range(1, 2 * len(nba.states) + 1) if v not in used)
    for w in existing:
        hit = w.macro & nba.accepting
        if hit:
            w.children.append(_Work(next(free), set(hit)))
    return _freeze(root)


def step_3(tree: SafraTree, nba: NBA, letter) -> SafraTree:
    """Replace every macrostate by its successor set under ``letter``."""
    if tree is None:
        return None
    root = _thaw(tree)
    for w in root.walk():
        w.macro = {r for q in w.macro for r in nba.successors(q, letter)}
    return _freeze(root)


def steps_4_6(tree: SafraTree) -> SafraTree:
    """Horizontal merge, removal of empty nodes, vertical merge with marking."""
    if tree is None:
        return None
    root = _thaw(tree)

    # 4: a state also held by an earlier sibling leaves the node and its subtree
    def merge(w: _Work):
        seen: set = set()
        for c in w.children:
            drop = c.macro & seen
            seen |= c.macro
            if drop:
                for d in c.walk():
                    d.macro -= drop
            merge(c)

    merge(root)

    # 5
    def prune(w: _Work):
        w.children = [c for c in w.children if c.macro]
        for c in w.children:
            prune(c)

    if not root.macro:
        return None
    prune(root)

    # 6
    def collapse(w: _Work):
        if w.children:
            union = set().union(*(c.macro for c in w.children))
            if union == w.macro:
                w.children = []
                w.mark = True
                return
        for c in w.children:
            collapse(c)

    collapse(root)
    return _freeze(root)


def safra_step(tree: SafraTree, nba: NBA, letter) -> SafraTree:
    return steps_4_6(step_3(steps_1_2(tree, nba), nba, letter))


def safra_determinize(nba: NBA, budget: int = DEFAULT_BUDGET, check: bool = True) -> DetAutomaton:
    """Rabin automaton equivalent to ``nba``; only reachable trees are built."""
    vocabulary = 2 * len(nba.states)
    init = initial_tree(nba)
    order: List[SafraTree] = [init]
    seen = {init}
    delta: Dict = {}
    i = 0
    while i < len(order):
        tree = order[i]
        i += 1
        for letter in nba.alphabet:
            nxt = safra_step(tree, nba, letter)
            if check:
                check_tree(nxt, vocabulary)
            delta[(tree, letter)] = nxt
            if nxt not in seen:
                if len(seen) >= budget:
                    raise StateBudgetExceeded(f"more than {budget} reachable Safra trees")
                seen.add(nxt)
                order.append(nxt)
    names = sorted(set().union(*(node_names(t) for t in order)))
    pairs = []
    for v in names:
        lacking = frozenset(t for t in order if v not in node_names(t))
        marked = frozenset(t for t in order if v in marked_names(t))
        if marked:
            pairs.append((lacking, marked))
    return DRA(order, nba.alphabet, delta, init, pairs)
