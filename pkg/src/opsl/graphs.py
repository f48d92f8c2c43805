# Iterative Tarjan; recursion depth would be bounded by component size otherwise.
from typing import Callable, Dict, Hashable, Iterable, List, Set


def tarjan_scc(vertices: Iterable[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]) -> List[List]:
    """Strongly connected components in reverse topological order.

    ``successors`` may return vertices not listed in ``vertices``; they are
    explored as well.
    """
    index: Dict = {}
    low: Dict = {}
    on_stack: Set = set()
    stack: List = []
    sccs: List[List] = []
    counter = 0

    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def reachable(start: Iterable[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]) -> Set:
    seen = set(start)
    todo = list(seen)
    while todo:
        v = todo.pop()
        for w in successors(v):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def has_cycle_through(comp: List, successors) -> bool:
    """Whether an SCC carries a nonempty cycle (size > 1 or a self-loop)."""
    if len(comp) > 1:
        return True
    v = comp[0]
    return any(w == v for w in successors(v))
