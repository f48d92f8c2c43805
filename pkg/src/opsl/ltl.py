"""LTL over maximal state subformulas: translation to NBA and lasso evaluation.

A path formula is read as LTL whose atoms are its maximal history
subformulas; a letter is the frozenset of those that hold.
"""
from __future__ import annotations

from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .automata import NBA, LassoWord, trim_nba
from .logic import Lift, Next, PNot, POr, PathFormula, Top, Until, max_state_subformulas

INIT = "init"


def alphabet_for(atoms: Sequence) -> Tuple[FrozenSet, ...]:
    """All letters over ``atoms`` in a fixed order (by subset bitmask)."""
    atoms = list(atoms)
    letters = []
    for mask in range(1 << len(atoms)):
        letters.append(frozenset(a for k, a in enumerate(atoms) if mask >> k & 1))
    return tuple(letters)


def _subformulas(phi: PathFormula) -> List[PathFormula]:
    """Post-order, duplicate-free list of the non-negation subformulas."""
    out: List[PathFormula] = []

    def walk(p):
        if isinstance(p, PNot):
            walk(p.arg)
            return
        if isinstance(p, Next):
            walk(p.arg)
        elif isinstance(p, (POr, Until)):
            walk(p.left)
            walk(p.right)
        elif not isinstance(p, Lift):
            raise TypeError(f"not a path formula: {p!r}")
        if p not in out:
            out.append(p)

    walk(phi)
    return out


def _holds(b: FrozenSet, p: PathFormula) -> bool:
    if isinstance(p, PNot):
        return not _holds(b, p.arg)
    return p in b


def _elementary_sets(base: List[PathFormula]) -> List[FrozenSet]:
    results: List[FrozenSet] = []

    def extend(k: int, current: set):
        if k == len(base):
            results.append(frozenset(current))
            return
        p = base[k]
        if isinstance(p, Lift) and isinstance(p.formula, Top):
            choices = [True]
        elif isinstance(p, POr):
            choices = [_holds(current, p.left) or _holds(current, p.right)]
        elif isinstance(p, Until):
            if _holds(current, p.right):
                choices = [True]
            elif not _holds(current, p.left):
                choices = [False]
            else:
                choices = [False, True]
        else:
            choices = [False, True]
        for c in choices:
            if c:
                current.add(p)
            extend(k + 1, current)
            current.discard(p)

    extend(0, set())
    return results


def ltl_to_nba(phi: PathFormula, atoms: Optional[Sequence] = None, trim: bool = True) -> NBA:
    """Büchi automaton for ``phi`` over the letters ``2^atoms``.

    States are the elementary subsets of the closure, degeneralised with a
    counter over the until-subformulas, plus a fresh initial state. The
    automaton reads the letter of the current position when leaving a state.
    """
    if atoms is None:
        atoms = max_state_subformulas(phi)
    atoms = tuple(atoms)
    alphabet = alphabet_for(atoms)
    base = _subformulas(phi)
    missing = [p.formula for p in base if isinstance(p, Lift) and not isinstance(p.formula, Top)
               and p.formula not in atoms]
    if missing:
        raise ValueError(f"atoms do not cover {missing!r}")
    nexts = [p for p in base if isinstance(p, Next)]
    untils = [p for p in base if isinstance(p, Until)]
    elementary = _elementary_sets(base)

    # atoms outside the closure are unconstrained, so one set b allows several letters
    inner = [a for a in atoms if Lift(a) in base]
    by_restriction: Dict[FrozenSet, List[FrozenSet]] = {}
    for letter in alphabet:
        by_restriction.setdefault(frozenset(a for a in letter if a in inner), []).append(letter)

    def letters_of(b) -> List[FrozenSet]:
        return by_restriction[frozenset(a for a in inner if Lift(a) in b)]

    def step_ok(b, b2) -> bool:
        for p in nexts:
            if (p in b) != _holds(b2, p.arg):
                return False
        for p in untils:
            expected = _holds(b, p.right) or (_holds(b, p.left) and p in b2)
            if (p in b) != expected:
                return False
        return True

    fair = [frozenset(b for b in elementary if p not in b or _holds(b, p.right)) for p in untils]
    k = len(fair)

    def bump(b, j):
        if k == 0:
            return 0
        return (j + 1) % k if b in fair[j] else j

    succ_cache: Dict = {}

    def succ_sets(b):
        if b not in succ_cache:
            succ_cache[b] = [b2 for b2 in elementary if step_ok(b, b2)]
        return succ_cache[b]

    delta: Dict = {}
    init_sets = [b for b in elementary if _holds(b, phi)]
    order: List = [INIT]
    seen = {INIT}

    def add(src, b, dst):
        for letter in letters_of(b):
            delta.setdefault((src, letter), set()).add(dst)
        if dst not in seen:
            seen.add(dst)
            order.append(dst)

    for b0 in init_sets:
        for b2 in succ_sets(b0):
            add(INIT, b0, (b2, bump(b0, 0)))
    i = 1
    while i < len(order):
        b, j = order[i]
        i += 1
        for b2 in succ_sets(b):
            add((b, j), b, (b2, bump(b, j)))

    accepting = frozenset(
        q for q in order if q != INIT and (k == 0 or (q[1] == 0 and q[0] in fair[0]))
    )
    # rename to small integers, initial state 0
    index = {q: n for n, q in enumerate(order)}
    nba = NBA(
        states=tuple(range(len(order))),
        alphabet=alphabet,
        delta={(index[q], a): frozenset(index[r] for r in rs) for (q, a), rs in delta.items()},
        initial=0,
        accepting=frozenset(index[q] for q in accepting),
    )
    return trim_nba(nba) if trim else nba


def evaluate_lasso(phi: PathFormula, word: LassoWord) -> bool:
    """Truth of ``phi`` at position 0 of an ultimately periodic word of letters."""
    n = len(word)
    succ = [word.next_pos(k) for k in range(n)]
    cache: Dict = {}

    def vec(p) -> List[bool]:
        if p in cache:
            return cache[p]
        if isinstance(p, Lift):
            if isinstance(p.formula, Top):
                out = [True] * n
            else:
                out = [p.formula in word.at(k) for k in range(n)]
        elif isinstance(p, PNot):
            out = [not v for v in vec(p.arg)]
        elif isinstance(p, POr):
            left, right = vec(p.left), vec(p.right)
            out = [a or b for a, b in zip(left, right)]
        elif isinstance(p, Next):
            inner = vec(p.arg)
            out = [inner[succ[k]] for k in range(n)]
        elif isinstance(p, Until):
            left, right = vec(p.left), vec(p.right)
            out = list(right)
            changed = True
            while changed:
                changed = False
                for k in range(n - 1, -1, -1):
                    if not out[k] and left[k] and out[succ[k]]:
                        out[k] = True
                        changed = True
        else:
            raise TypeError(f"not a path formula: {p!r}")
        cache[p] = out
        return out

    return vec(phi)[0]
