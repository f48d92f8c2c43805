"""Three-sorted formula syntax: history formulas, path formulas and terms.

Concrete grammar (sugar in brackets is desugared while parsing)::

    hist ::= ident | true | [false] | not hist | hist or hist | [hist and hist]
           | [hist -> hist] | exists x. hist | [forall x. hist]
           | term cmp term | obs[i](path) | ( hist )
    path ::= hist(hist) | ident | not path | path or path | [path and path]
           | [path -> path] | X path | path U path | [F path] | [G path] | ( path )
    term ::= rational | term ^-1 | term + term | term * term | ( term )
           | P[binding](path) | D[binding][i](path)
    cmp  ::= < | = | > | [<= | >= | !=]

A binding is ``1:x,2:y`` or ``all:x``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .model import MemorylessStrategy, StrategyProfile


# -- history formulas ---------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Not:
    arg: "HistoryFormula"


@dataclass(frozen=True)
class Or:
    left: "HistoryFormula"
    right: "HistoryFormula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "HistoryFormula"


@dataclass(frozen=True)
class Compare:
    left: "ArithTerm"
    op: str  # one of "<", "=", ">"
    right: "ArithTerm"

    def __post_init__(self):
        if self.op not in ("<", "=", ">"):
            raise ValueError(f"primitive comparison must be <, = or >, not {self.op!r}")


@dataclass(frozen=True)
class FullObs:
    agent: str
    path: "PathFormula"


HistoryFormula = Union[Atom, Top, Not, Or, Exists, Compare, FullObs]


# -- path formulas ------------------------------------------------------------

@dataclass(frozen=True)
class Lift:
    formula: HistoryFormula


@dataclass(frozen=True)
class PNot:
    arg: "PathFormula"


@dataclass(frozen=True)
class POr:
    left: "PathFormula"
    right: "PathFormula"


@dataclass(frozen=True)
class Next:
    arg: "PathFormula"


@dataclass(frozen=True)
class Until:
    left: "PathFormula"
    right: "PathFormula"


PathFormula = Union[Lift, PNot, POr, Next, Until]

TRUE = Lift(Top())


def eventually(p: PathFormula) -> PathFormula:
    return Until(TRUE, p)


def always(p: PathFormula) -> PathFormula:
    return PNot(Until(TRUE, PNot(p)))


# -- arithmetic terms ---------------------------------------------------------

@dataclass(frozen=True)
class Binding:
    """Total map agent -> variable; ``default`` covers the ``all:x`` sugar."""

    pairs: Tuple[Tuple[str, str], ...] = ()
    default: Optional[str] = None

    def variable(self, agent: str) -> str:
        for a, x in self.pairs:
            if a == agent:
                return x
        if self.default is None:
            raise KeyError(f"binding does not cover agent {agent}")
        return self.default

    def variables(self) -> FrozenSet[str]:
        vs = {x for _, x in self.pairs}
        if self.default is not None:
            vs.add(self.default)
        return frozenset(vs)

    def covers(self, agents: Sequence[str]) -> bool:
        return self.default is not None or all(a in dict(self.pairs) for a in agents)


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Inverse:
    arg: "ArithTerm"


@dataclass(frozen=True)
class Plus:
    left: "ArithTerm"
    right: "ArithTerm"


@dataclass(frozen=True)
class Times:
    left: "ArithTerm"
    right: "ArithTerm"


@dataclass(frozen=True)
class Prob:
    binding: Binding
    path: PathFormula


@dataclass(frozen=True)
class Degree:
    binding: Binding
    agent: str
    path: PathFormula


ArithTerm = Union[Const, Inverse, Plus, Times, Prob, Degree]

HISTORY_TYPES = (Atom, Top, Not, Or, Exists, Compare, FullObs)
PATH_TYPES = (Lift, PNot, POr, Next, Until)
TERM_TYPES = (Const, Inverse, Plus, Times, Prob, Degree)


# -- valuations ---------------------------------------------------------------

class UnboundVariableError(KeyError):
    pass


class Valuation(Mapping[str, MemorylessStrategy]):
    """Partial map from variables to memoryless strategies; immutable."""

    def __init__(self, table: Optional[Mapping[str, MemorylessStrategy]] = None):
        self._table: Dict[str, MemorylessStrategy] = dict(table or {})

    def __getitem__(self, var: str) -> MemorylessStrategy:
        try:
            return self._table[var]
        except KeyError:
            raise UnboundVariableError(var) from None

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def __repr__(self):
        return f"Valuation({self._table!r})"

    def extend(self, var: str, sigma: MemorylessStrategy) -> "Valuation":
        table = dict(self._table)
        table[var] = sigma
        return Valuation(table)

    def profile(self, binding: Binding, agents: Sequence[str]) -> StrategyProfile:
        """Compose with a binding to obtain a strategy profile."""
        return {a: self[binding.variable(a)] for a in agents}

    def fingerprint(self, variables) -> Tuple:
        return tuple(sorted((x, hash(self._table[x])) for x in variables if x in self._table))


# -- structural queries -------------------------------------------------------

def free_vars(phi) -> FrozenSet[str]:
    """Variables occurring in a binding that are not captured by an ``exists``."""
    if isinstance(phi, (Atom, Top, Const)):
        return frozenset()
    if isinstance(phi, (Not, PNot)):
        return free_vars(phi.arg)
    if isinstance(phi, (Or, POr, Until, Plus, Times)):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, Exists):
        return free_vars(phi.body) - {phi.var}
    if isinstance(phi, Compare):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, FullObs):
        return free_vars(phi.path)
    if isinstance(phi, Lift):
        return free_vars(phi.formula)
    if isinstance(phi, (Next, Inverse)):
        return free_vars(phi.arg)
    if isinstance(phi, (Prob, Degree)):
        return phi.binding.variables() | free_vars(phi.path)
    raise TypeError(f"not a formula: {phi!r}")


def bindings(phi) -> Iterator[Binding]:
    """Every binding occurring in a formula or term, outermost first."""
    if isinstance(phi, (Prob, Degree)):
        yield phi.binding
        yield from bindings(phi.path)
    elif isinstance(phi, (Not, PNot, Next, Inverse)):
        yield from bindings(phi.arg)
    elif isinstance(phi, (Or, POr, Until, Plus, Times, Compare)):
        yield from bindings(phi.left)
        yield from bindings(phi.right)
    elif isinstance(phi, Exists):
        yield from bindings(phi.body)
    elif isinstance(phi, FullObs):
        yield from bindings(phi.path)
    elif isinstance(phi, Lift):
        yield from bindings(phi.formula)


def is_sentence(phi: HistoryFormula) -> bool:
    return not free_vars(phi)


def max_state_subformulas(path: PathFormula) -> Tuple[HistoryFormula, ...]:
    """Maximal history subformulas of a path formula, left to right, without repeats.

    The constant ``true`` is not a state subformula; it is read as the LTL constant.
    """
    out: List[HistoryFormula] = []

    def walk(p):
        if isinstance(p, Lift):
            if not isinstance(p.formula, Top) and p.formula not in out:
                out.append(p.formula)
        elif isinstance(p, (PNot, Next)):
            walk(p.arg)
        elif isinstance(p, (POr, Until)):
            walk(p.left)
            walk(p.right)
        else:
            raise TypeError(f"not a path formula: {p!r}")

    walk(path)
    return tuple(out)


def is_propositional(h: HistoryFormula) -> bool:
    """True when ``h`` is a Boolean combination of atoms (its truth is valuation-free)."""
    if isinstance(h, (Atom, Top)):
        return True
    if isinstance(h, Not):
        return is_propositional(h.arg)
    if isinstance(h, Or):
        return is_propositional(h.left) and is_propositional(h.right)
    return False


def subterms(t: ArithTerm) -> Iterator[ArithTerm]:
    """Post-order enumeration of the arithmetic subterms of ``t``."""
    if isinstance(t, Inverse):
        yield from subterms(t.arg)
    elif isinstance(t, (Plus, Times)):
        yield from subterms(t.left)
        yield from subterms(t.right)
    yield t


# -- printing -----------------------------------------------------------------

def _fmt_binding(b: Binding) -> str:
    parts = [f"{a}:{x}" for a, x in b.pairs]
    if b.default is not None:
        parts.append(f"all:{b.default}")
    return ",".join(parts)


def pretty(phi) -> str:
    """Render any AST node in the concrete syntax accepted by :func:`parse`."""
    if isinstance(phi, Atom):
        return phi.name
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Not):
        return f"not {pretty(phi.arg)}"
    if isinstance(phi, Or):
        return f"({pretty(phi.left)} or {pretty(phi.right)})"
    if isinstance(phi, Exists):
        return f"(exists {phi.var}. {pretty(phi.body)})"
    if isinstance(phi, Compare):
        return f"({pretty(phi.left)} {phi.op} {pretty(phi.right)})"
    if isinstance(phi, FullObs):
        return f"obs[{phi.agent}]({pretty(phi.path)})"
    if isinstance(phi, Lift):
        if isinstance(phi.formula, (Atom, Top)):
            return pretty(phi.formula)
        return f"hist({pretty(phi.formula)})"
    if isinstance(phi, PNot):
        return f"not {pretty(phi.arg)}"
    if isinstance(phi, POr):
        return f"({pretty(phi.left)} or {pretty(phi.right)})"
    if isinstance(phi, Next):
        return f"X {pretty(phi.arg)}"
    if isinstance(phi, Until):
        return f"({pretty(phi.left)} U {pretty(phi.right)})"
    if isinstance(phi, Const):
        q = phi.value
        if q < 0:
            raise ValueError("negative constants have no concrete syntax")
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if isinstance(phi, Inverse):
        return f"{_atomic_term(phi.arg)}^-1"
    if isinstance(phi, Plus):
        return f"({pretty(phi.left)} + {pretty(phi.right)})"
    if isinstance(phi, Times):
        return f"({pretty(phi.left)} * {pretty(phi.right)})"
    if isinstance(phi, Prob):
        return f"P[{_fmt_binding(phi.binding)}]({pretty(phi.path)})"
    if isinstance(phi, Degree):
        return f"D[{_fmt_binding(phi.binding)}][{phi.agent}]({pretty(phi.path)})"
    raise TypeError(f"not a formula: {phi!r}")


def _atomic_term(t: ArithTerm) -> str:
    text = pretty(t)
    if isinstance(t, Const) and t.value.denominator != 1:
        return f"({text})"
    return text


# -- parsing ------------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.column = col
        self.pos = pos


class SortError(ParseError):
    pass


_UNICODE = {"¬": "not", "∨": "or", "∧": "and", "→": "->", "≤": "<=", "≥": ">=", "≠": "!=",
            "∃": "exists", "∀": "forall"}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\^-1|<=|>=|!=|->|[()\[\],:.+*<>=])
  | (?P<uni>[¬∨∧→≤≥≠∃∀])
    """,
    re.VERBOSE,
)

_TEMPORAL = {"X", "U", "F", "G"}
_KEYWORDS = {"not", "or", "and", "exists", "forall", "obs", "hist", "P", "D", "true", "false"} | _TEMPORAL


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind == "uni":
            word = _UNICODE[m.group()]
            toks.append(_Tok("sym" if not word.isalpha() else "ident", word, pos))
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.furthest: Optional[ParseError] = None

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "ident")

    def error(self, message: str, cls=ParseError):
        err = cls(message, self.text, self.tok.pos)
        if self.furthest is None or err.pos >= self.furthest.pos:
            self.furthest = err
        return err

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r} but found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def attempt(self, fn):
        saved = self.i
        try:
            return fn()
        except ParseError:
            self.i = saved
            return None

    def name(self) -> str:
        if self.tok.kind not in ("ident", "num") or self.tok.text in _KEYWORDS:
            raise self.error(f"expected a name but found {self.tok.text or 'end of input'!r}")
        text = self.tok.text
        self.i += 1
        return text

    # history level
    def hist(self) -> HistoryFormula:
        left = self.hist_or()
        if self.at("->"):
            self.i += 1
            right = self.hist()
            return Or(Not(left), right)
        return left

    def hist_or(self) -> HistoryFormula:
        left = self.hist_and()
        while self.at("or"):
            self.i += 1
            left = Or(left, self.hist_and())
        return left

    def hist_and(self) -> HistoryFormula:
        left = self.hist_unary()
        while self.at("and"):
            self.i += 1
            right = self.hist_unary()
            left = Not(Or(Not(left), Not(right)))
        return left

    def hist_unary(self) -> HistoryFormula:
        tok = self.tok
        if self.at("not"):
            self.i += 1
            return Not(self.hist_unary())
        if self.at("exists") or self.at("forall"):
            self.i += 1
            var = self.name()
            self.expect(".")
            body = self.hist()
            return Exists(var, body) if tok.text == "exists" else Not(Exists(var, Not(body)))
        if tok.text in _TEMPORAL and tok.kind == "ident":
            raise self.error(f"temporal operator {tok.text!r} outside obs[..], P[..] or D[..]", SortError)
        if self.at("obs"):
            self.i += 1
            self.expect("[")
            agent = self.name()
            self.expect("]")
            self.expect("(")
            body = self.path()
            self.expect(")")
            return FullObs(agent, body)
        if self.at("true"):
            self.i += 1
            return Top()
        if self.at("false"):
            self.i += 1
            return Not(Top())
        if self.at("("):
            found = self.attempt(self._paren_hist)
            if found is not None:
                return found
            return self.comparison()
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            self.i += 1
            if self.tok.text in ("<", "=", ">", "<=", ">=", "!=", "+", "*", "^-1"):
                raise self.error("atomic propositions cannot appear in arithmetic terms", SortError)
            return Atom(tok.text)
        return self.comparison()

    def _paren_hist(self) -> HistoryFormula:
        self.expect("(")
        inner = self.hist()
        self.expect(")")
        if self.tok.text in ("<", "=", ">", "<=", ">=", "!=", "+", "*", "^-1"):
            raise self.error("parenthesised term")
        return inner

    def comparison(self) -> HistoryFormula:
        left = self.term()
        op = self.tok.text
        if op not in ("<", "=", ">", "<=", ">=", "!="):
            raise self.error(f"expected a comparison operator but found {op or 'end of input'!r}")
        self.i += 1
        right = self.term()
        if op == "<=":
            return Not(Compare(left, ">", right))
        if op == ">=":
            return Not(Compare(left, "<", right))
        if op == "!=":
            return Not(Compare(left, "=", right))
        return Compare(left, op, right)

    # path level
    def path(self) -> PathFormula:
        left = self.path_or()
        if self.at("->"):
            self.i += 1
            right = self.path()
            return POr(PNot(left), right)
        return left

    def path_or(self) -> PathFormula:
        left = self.path_and()
        while self.at("or"):
            self.i += 1
            left = POr(left, self.path_and())
        return left

    def path_and(self) -> PathFormula:
        left = self.path_until()
        while self.at("and"):
            self.i += 1
            right = self.path_until()
            left = PNot(POr(PNot(left), PNot(right)))
        return left

    def path_until(self) -> PathFormula:
        left = self.path_unary()
        if self.at("U"):
            self.i += 1
            return Until(left, self.path_until())
        return left

    def path_unary(self) -> PathFormula:
        tok = self.tok
        if self.at("not"):
            self.i += 1
            return PNot(self.path_unary())
        if self.at("X"):
            self.i += 1
            return Next(self.path_unary())
        if self.at("F"):
            self.i += 1
            return eventually(self.path_unary())
        if self.at("G"):
            self.i += 1
            return always(self.path_unary())
        if self.at("hist"):
            self.i += 1
            self.expect("(")
            inner = self.hist()
            self.expect(")")
            return Lift(inner)
        if self.at("true"):
            self.i += 1
            return TRUE
        if self.at("false"):
            self.i += 1
            return PNot(TRUE)
        if self.at("obs") or self.at("exists") or self.at("forall"):
            return Lift(self.hist_unary())
        if self.at("("):
            def paren_path():
                self.expect("(")
                inner = self.path()
                self.expect(")")
                if self.tok.text in ("<", "=", ">", "<=", ">=", "!=", "+", "*", "^-1"):
                    raise self.error("parenthesised term")
                return inner
            found = self.attempt(paren_path)
            if found is not None:
                return found
            return Lift(self.comparison())
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            self.i += 1
            return Lift(Atom(tok.text))
        return Lift(self.comparison())

    # terms
    def term(self) -> ArithTerm:
        left = self.term_prod()
        while self.at("+"):
            self.i += 1
            left = Plus(left, self.term_prod())
        return left

    def term_prod(self) -> ArithTerm:
        left = self.term_postfix()
        while self.at("*"):
            self.i += 1
            left = Times(left, self.term_postfix())
        return left

    def term_postfix(self) -> ArithTerm:
        t = self.term_primary()
        while self.at("^-1"):
            self.i += 1
            t = Inverse(t)
        return t

    def term_primary(self) -> ArithTerm:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(Fraction(tok.text))
        if self.at("("):
            self.i += 1
            t = self.term()
            self.expect(")")
            return t
        if self.at("P"):
            self.i += 1
            binding = self.binding()
            self.expect("(")
            body = self.path()
            self.expect(")")
            return Prob(binding, body)
        if self.at("D"):
            self.i += 1
            binding = self.binding()
            self.expect("[")
            agent = self.name()
            self.expect("]")
            self.expect("(")
            body = self.path()
            self.expect(")")
            return Degree(binding, agent, body)
        raise self.error(f"expected a term but found {tok.text or 'end of input'!r}")

    def binding(self) -> Binding:
        self.expect("[")
        pairs: List[Tuple[str, str]] = []
        default = None
        while True:
            agent = self.tok.text
            if self.tok.kind not in ("ident", "num"):
                raise self.error("expected agent:variable in binding")
            self.i += 1
            self.expect(":")
            var = self.name()
            if agent == "all":
                default = var
            else:
                if any(a == agent for a, _ in pairs):
                    raise self.error(f"agent {agent} bound twice")
                pairs.append((agent, var))
            if self.at(","):
                self.i += 1
                continue
            break
        self.expect("]")
        return Binding(tuple(pairs), default)

    def finish(self, node):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node


def _run(text: str, entry: str):
    p = _Parser(text)
    try:
        return p.finish(getattr(p, entry)())
    except ParseError as err:
        if p.furthest is not None and p.furthest.pos > err.pos and not isinstance(err, SortError):
            raise p.furthest from None
        raise


def parse(text: str) -> HistoryFormula:
    """Parse a history formula (the sort of sentences)."""
    return _run(text, "hist")


def parse_path(text: str) -> PathFormula:
    return _run(text, "path")


def parse_term(text: str) -> ArithTerm:
    return _run(text, "term")
