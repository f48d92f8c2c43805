"""First-order real arithmetic: terms, formulas and constant-folding constructors.

Nodes are immutable. Constructors such as :func:`and_` fold constants
eagerly, so a subformula that the model fixes outright never reaches the
output. Shared Python objects are counted once by :func:`dag_size`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Tuple, Union


# -- terms --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Var:
    name: str


@dataclass(frozen=True, eq=False)
class Num:
    value: Fraction


@dataclass(frozen=True, eq=False)
class Add:
    args: Tuple["Term", ...]


@dataclass(frozen=True, eq=False)
class Mul:
    args: Tuple["Term", ...]


Term = Union[Var, Num, Add, Mul]


# -- formulas -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoolConst:
    value: bool


@dataclass(frozen=True, eq=False)
class Rel:
    """``left op right`` with op one of ``<``, ``<=``, ``=``."""

    op: str
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class NotF:
    arg: "Formula"


@dataclass(frozen=True, eq=False)
class AndF:
    args: Tuple["Formula", ...]


@dataclass(frozen=True, eq=False)
class OrF:
    args: Tuple["Formula", ...]


@dataclass(frozen=True, eq=False)
class Quant:
    kind: str  # "exists" or "forall"
    variables: Tuple[Var, ...]
    body: "Formula"


Formula = Union[BoolConst, Rel, NotF, AndF, OrF, Quant]

TRUE = BoolConst(True)
FALSE = BoolConst(False)
ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


def const(value) -> Num:
    v = Fraction(value)
    if v == 0:
        return ZERO
    if v == 1:
        return ONE
    return Num(v)


def top(cond: bool) -> BoolConst:
    """The constant formula for a condition decided outside the sentence."""
    return TRUE if cond else FALSE


def add(*args: Term) -> Term:
    total = Fraction(0)
    rest = []
    for a in args:
        if isinstance(a, Num):
            total += a.value
        elif isinstance(a, Add):
            rest.extend(a.args)
        else:
            rest.append(a)
    if not rest:
        return const(total)
    if total:
        rest.append(const(total))
    return rest[0] if len(rest) == 1 else Add(tuple(rest))


def mul(*args: Term) -> Term:
    coeff = Fraction(1)
    rest = []
    for a in args:
        if isinstance(a, Num):
            coeff *= a.value
        elif isinstance(a, Mul):
            rest.extend(a.args)
        else:
            rest.append(a)
        if coeff == 0:
            return ZERO
    if not rest:
        return const(coeff)
    if coeff != 1:
        rest.insert(0, const(coeff))
    return rest[0] if len(rest) == 1 else Mul(tuple(rest))


def _rel(op: str, a: Term, b: Term) -> Formula:
    if isinstance(a, Num) and isinstance(b, Num):
        x, y = a.value, b.value
        return top(x < y if op == "<" else x <= y if op == "<=" else x == y)
    return Rel(op, a, b)


def eq(a: Term, b: Term) -> Formula:
    """``a ≈ b``"""
    return _rel("=", a, b)


def lt(a: Term, b: Term) -> Formula:
    return _rel("<", a, b)


def le(a: Term, b: Term) -> Formula:
    return _rel("<=", a, b)


def gt(a: Term, b: Term) -> Formula:
    return _rel("<", b, a)


def ge(a: Term, b: Term) -> Formula:
    return _rel("<=", b, a)


def ne(a: Term, b: Term) -> Formula:
    return not_(eq(a, b))


def not_(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return top(not f.value)
    if isinstance(f, NotF):
        return f.arg
    return NotF(f)


def and_(*args: Formula) -> Formula:
    out = []
    for f in _flatten(args, AndF):
        if f is FALSE or (isinstance(f, BoolConst) and not f.value):
            return FALSE
        if isinstance(f, BoolConst):
            continue
        out.append(f)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else AndF(tuple(out))


def or_(*args: Formula) -> Formula:
    out = []
    for f in _flatten(args, OrF):
        if isinstance(f, BoolConst):
            if f.value:
                return TRUE
            continue
        out.append(f)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else OrF(tuple(out))


def _flatten(args, cls) -> Iterator[Formula]:
    for a in args:
        if isinstance(a, (list, tuple)) or hasattr(a, "__next__"):
            yield from _flatten(a, cls)
        elif isinstance(a, cls):
            yield from a.args
        else:
            yield a


def implies(a: Formula, b: Formula) -> Formula:
    return or_(not_(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    if isinstance(a, BoolConst):
        return b if a.value else not_(b)
    if isinstance(b, BoolConst):
        return a if b.value else not_(a)
    return and_(implies(a, b), implies(b, a))


def exists(variables: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(variables)
    if not vs or isinstance(body, BoolConst):
        return body
    return Quant("exists", vs, body)


def forall(variables: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(variables)
    if not vs or isinstance(body, BoolConst):
        return body
    return Quant("forall", vs, body)


# -- structural measures ------------------------------------------------------

def children(node) -> Tuple:
    if isinstance(node, (Add, Mul, AndF, OrF)):
        return node.args
    if isinstance(node, Rel):
        return (node.left, node.right)
    if isinstance(node, NotF):
        return (node.arg,)
    if isinstance(node, Quant):
        return node.variables + (node.body,)
    return ()


def _postorder(root) -> Iterator:
    seen = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            yield node
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for c in children(node):
            if id(c) not in seen:
                stack.append((c, False))


def dag_size(root) -> int:
    """Number of distinct node objects."""
    return sum(1 for _ in _postorder(root))


def tree_size(root) -> int:
    """Number of nodes once every shared subformula is written out."""
    sizes: Dict[int, int] = {}
    for node in _postorder(root):
        sizes[id(node)] = 1 + sum(sizes[id(c)] for c in children(node))
    return sizes[id(root)]


def quantifier_count(root) -> int:
    """Number of quantified variables in the written-out sentence."""
    counts: Dict[int, int] = {}
    for node in _postorder(root):
        own = len(node.variables) if isinstance(node, Quant) else 0
        counts[id(node)] = own + sum(counts[id(c)] for c in children(node))
    return counts[id(root)]


def quantifier_blocks(root) -> int:
    """Number of quantifier nodes in the written-out sentence."""
    counts: Dict[int, int] = {}
    for node in _postorder(root):
        own = 1 if isinstance(node, Quant) else 0
        counts[id(node)] = own + sum(counts[id(c)] for c in children(node))
    return counts[id(root)]


def free_variables(root) -> frozenset:
    """Names of variables occurring free."""
    memo: Dict[int, frozenset] = {}
    for node in _postorder(root):
        if isinstance(node, Var):
            memo[id(node)] = frozenset([node.name])
        elif isinstance(node, Quant):
            memo[id(node)] = memo[id(node.body)] - {v.name for v in node.variables}
        else:
            acc = frozenset()
            for c in children(node):
                acc |= memo[id(c)]
            memo[id(node)] = acc
    return memo[id(root)]


def evaluate(f, env: Dict[str, Fraction]):
    """Evaluate a quantifier-free term or formula under ``env``."""
    if isinstance(f, Var):
        return env[f.name]
    if isinstance(f, Num):
        return f.value
    if isinstance(f, Add):
        return sum((evaluate(a, env) for a in f.args), Fraction(0))
    if isinstance(f, Mul):
        out = Fraction(1)
        for a in f.args:
            out *= evaluate(a, env)
        return out
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Rel):
        x, y = evaluate(f.left, env), evaluate(f.right, env)
        return x < y if f.op == "<" else x <= y if f.op == "<=" else x == y
    if isinstance(f, NotF):
        return not evaluate(f.arg, env)
    if isinstance(f, AndF):
        return all(evaluate(a, env) for a in f.args)
    if isinstance(f, OrF):
        return any(evaluate(a, env) for a in f.args)
    raise ValueError("cannot evaluate quantified formulas")
