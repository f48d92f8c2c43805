"""Reading and writing automata in the Hanoi Omega-Automata (HOA v1) format.

Two letter encodings are used. When the alphabet is the full powerset of a
set of propositions (as for automata built from LTL formulas), each
proposition becomes an AP and every edge carries a full minterm. Any other
alphabet is numbered and the index is written in binary over APs ``l0``,
``l1``, ...; the header line ``opsl-letter`` keeps a printable name for each
index. See docs/hoa.md for the full mapping.
"""
from __future__ import annotations

import itertools
import re
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from .automata import NBA, DetAutomaton
from .logic import pretty

__all__ = ["to_hoa", "from_hoa", "HoaError"]


class HoaError(ValueError):
    pass


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _name(x) -> str:
    """Printable name that does not depend on set iteration order."""
    if isinstance(x, str):
        return x
    if isinstance(x, (frozenset, set)):
        return "{" + ", ".join(sorted(_name(e) for e in x)) + "}"
    if isinstance(x, tuple):
        return "(" + ", ".join(_name(e) for e in x) + ")"
    try:
        return pretty(x)
    except (TypeError, ValueError, AttributeError):
        return repr(x)


def _numbering(aut) -> Dict[Hashable, int]:
    """Breadth-first numbering from the initial state, so output is canonical."""
    order = [aut.initial]
    index = {aut.initial: 0}
    k = 0
    while k < len(order):
        q = order[k]
        k += 1
        for a in aut.alphabet:
            succ = aut.successors(q, a) if isinstance(aut, NBA) else [aut.step(q, a)]
            for r in sorted(succ, key=_name):
                if r not in index:
                    index[r] = len(order)
                    order.append(r)
    for q in sorted((q for q in aut.states if q not in index), key=_name):
        index[q] = len(order)
        order.append(q)
    return index


def _powerset_aps(alphabet: Sequence) -> Optional[List]:
    if not alphabet or not all(isinstance(a, frozenset) for a in alphabet):
        return None
    props = sorted(set().union(*alphabet), key=_name)
    if len(alphabet) != 2 ** len(props) or len(set(alphabet)) != len(alphabet):
        return None
    return props


def _minterm(bits: Sequence[bool]) -> str:
    if not bits:
        return "t"
    return "&".join(str(k) if b else f"!{k}" for k, b in enumerate(bits))


def _letter_labels(alphabet: Sequence, letter_name: Callable) -> Tuple[List[str], Dict, List[str]]:
    """APs, letter -> label, extra header lines."""
    props = _powerset_aps(alphabet)
    if props is not None:
        labels = {a: _minterm([p in a for p in props]) for a in alphabet}
        return [_name(p) for p in props], labels, []
    width = max(1, (len(alphabet) - 1).bit_length())
    labels = {a: _minterm([(k >> b) & 1 == 1 for b in range(width)]) for k, a in enumerate(alphabet)}
    extra = [f"opsl-letter: {k} {_quote(letter_name(a))}" for k, a in enumerate(alphabet)]
    if len(alphabet) < 2 ** width:
        # unused codes are excluded so that the automaton stays complete
        extra.append(f"opsl-letters: {len(alphabet)}")
    return [f"l{b}" for b in range(width)], labels, extra


def to_hoa(aut, name: Optional[str] = None, letter_name: Callable = _name) -> str:
    """Render an :class:`NBA` or :class:`DetAutomaton` as HOA text."""
    index = _numbering(aut)
    ordered = sorted(aut.states, key=index.__getitem__)
    aps, labels, extra = _letter_labels(aut.alphabet, letter_name)
    lines = ["HOA: v1"]
    if name:
        lines.append(f"name: {_quote(name)}")
    lines.append(f"States: {len(aut.states)}")
    lines.append(f"Start: {index[aut.initial]}")
    lines.append(f"AP: {len(aps)} " + " ".join(_quote(p) for p in aps))
    marks: Dict[Hashable, List[int]] = {q: [] for q in aut.states}
    if isinstance(aut, NBA):
        lines.append("acc-name: Buchi")
        lines.append("Acceptance: 1 Inf(0)")
        lines.append("properties: trans-labels explicit-labels state-acc")
        for q in aut.accepting:
            marks[q].append(0)
    else:
        k = len(aut.acceptance)
        if aut.kind == "rabin":
            cond = " | ".join(f"(Fin({2 * i})&Inf({2 * i + 1}))" for i in range(k)) or "f"
            lines.append(f"acc-name: Rabin {k}")
        else:
            cond = " & ".join(f"(Fin({2 * i})|Inf({2 * i + 1}))" for i in range(k)) or "t"
            lines.append(f"acc-name: Streett {k}")
        lines.append(f"Acceptance: {2 * k} {cond}")
        lines.append("properties: trans-labels explicit-labels state-acc deterministic complete")
        for i, (e, f) in enumerate(aut.acceptance):
            for q in e:
                marks[q].append(2 * i)
            for q in f:
                marks[q].append(2 * i + 1)
    lines.extend(extra)
    lines.append("--BODY--")
    for q in ordered:
        acc = " {" + " ".join(map(str, sorted(marks[q]))) + "}" if marks[q] else ""
        lines.append(f"State: {index[q]} {_quote(_name(q))}{acc}")
        for a in aut.alphabet:
            if isinstance(aut, NBA):
                targets = sorted(index[r] for r in aut.successors(q, a))
            else:
                targets = [index[aut.step(q, a)]]
            for t in targets:
                lines.append(f"[{labels[a]}] {t}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


# -- reader -------------------------------------------------------------------

_TOKEN = re.compile(r'\s*(?:(?P<str>"(?:[^"\\]|\\.)*")|(?P<int>\d+)|(?P<id>[A-Za-z@_][\w\-]*:?)|(?P<sym>--BODY--|--END--|--ABORT--|[\[\]{}()!&|]))')


def _tokens(text: str):
    text = re.sub(r"/\*.*?\*/", " ", text, flags=re.S)
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise HoaError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "str":
            val = re.sub(r"\\(.)", r"\1", val[1:-1])
        elif kind == "int":
            val = int(val)
        out.append((kind, val))
        pos = m.end()
    return out


class _Expr:
    """Tiny recursive-descent parser for label and acceptance expressions."""

    def __init__(self, toks, pos):
        self.toks, self.pos = toks, pos

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, None)

    def take(self, val=None):
        tok = self.peek()
        if val is not None and tok[1] != val:
            raise HoaError(f"expected {val!r}, got {tok[1]!r}")
        self.pos += 1
        return tok

    def disj(self, atom):
        parts = [self.conj(atom)]
        while self.peek()[1] == "|":
            self.take()
            parts.append(self.conj(atom))
        return parts[0] if len(parts) == 1 else ("or", parts)

    def conj(self, atom):
        parts = [self.unary(atom)]
        while self.peek()[1] == "&":
            self.take()
            parts.append(self.unary(atom))
        return parts[0] if len(parts) == 1 else ("and", parts)

    def unary(self, atom):
        kind, val = self.peek()
        if val == "!":
            self.take()
            return ("not", self.unary(atom))
        if val == "(":
            self.take()
            e = self.disj(atom)
            self.take(")")
            return e
        return atom(self)


def _label_atom(p: _Expr):
    kind, val = p.take()
    if kind == "int":
        return ("ap", val)
    if val in ("t", "f"):
        return ("const", val == "t")
    raise HoaError(f"bad label token {val!r}")


def _acc_atom(p: _Expr):
    kind, val = p.take()
    if val in ("Inf", "Fin"):
        p.take("(")
        neg = p.peek()[1] == "!"
        if neg:
            raise HoaError("negated acceptance sets are not supported")
        _, s = p.take()
        p.take(")")
        return (val, s)
    if val in ("t", "f"):
        return ("const", val == "t")
    raise HoaError(f"bad acceptance token {val!r}")


def _eval_label(e, bits: Sequence[bool]) -> bool:
    tag = e[0]
    if tag == "ap":
        return bits[e[1]]
    if tag == "const":
        return e[1]
    if tag == "not":
        return not _eval_label(e[1], bits)
    if tag == "and":
        return all(_eval_label(x, bits) for x in e[1])
    return any(_eval_label(x, bits) for x in e[1])


def _acceptance_kind(e) -> Tuple[str, List[Tuple[int, int]]]:
    """Classify as buchi, rabin or streett, returning (Fin, Inf) set-index pairs."""
    if e == ("const", False):
        return "rabin", []
    if e == ("const", True):
        return "streett", []
    if e[0] == "Inf":
        return "buchi", [(-1, e[1])]

    def pair(x, op):
        if x[0] == op and len(x[1]) == 2:
            a, b = x[1]
            if a[0] == "Fin" and b[0] == "Inf":
                return (a[1], b[1])
        return None

    for outer, inner, kind in (("or", "and", "rabin"), ("and", "or", "streett")):
        parts = e[1] if e[0] == outer else [e]
        pairs = [pair(x, inner) for x in parts]
        if all(pairs):
            return kind, pairs
    raise HoaError("acceptance is not Buchi, Rabin or Streett")


def from_hoa(text: str, letters: Optional[Sequence] = None, aps: Optional[Dict[str, Hashable]] = None):
    """Parse HOA text back into an :class:`NBA` or :class:`DetAutomaton`.

    Letters are recovered as frozensets of AP names (mapped through ``aps``
    when given) for powerset alphabets, and as ``letters[k]`` (default the
    printable name) for numbered ones. State names become the state objects
    when present, else the state numbers.
    """
    toks = _tokens(text)
    pos = 0
    header: Dict[str, list] = {}
    while pos < len(toks) and toks[pos][1] != "--BODY--":
        kind, key = toks[pos]
        if kind != "id" or not key.endswith(":"):
            raise HoaError(f"expected a header name, got {key!r}")
        pos += 1
        key = key[:-1]
        if key == "Acceptance":
            n = toks[pos][1]
            p = _Expr(toks, pos + 1)
            header[key] = [n, p.disj(_acc_atom)]
            pos = p.pos
            continue
        vals = []
        while pos < len(toks) and not (toks[pos][0] == "id" and toks[pos][1].endswith(":")) \
                and toks[pos][1] != "--BODY--":
            vals.append(toks[pos][1])
            pos += 1
        header.setdefault(key, []).append(vals)
    if pos >= len(toks):
        raise HoaError("missing --BODY--")
    if header.get("HOA") != [["v1"]]:
        raise HoaError("only HOA v1 is supported")
    n_states = header["States"][0][0]
    start = header["Start"][0][0]
    ap_vals = header["AP"][0]
    ap_names = ap_vals[1:]
    if len(ap_names) != ap_vals[0]:
        raise HoaError("AP count does not match")
    acc_kind, pairs = _acceptance_kind(header["Acceptance"][1])

    # alphabet
    if "opsl-letter" in header:
        named = {v[0]: v[1] for v in header["opsl-letter"]}
        count = header["opsl-letters"][0][0] if "opsl-letters" in header else 2 ** len(ap_names)
        alphabet = [letters[k] if letters is not None else named[k] for k in range(count)]
        bits_of = [[(k >> b) & 1 == 1 for b in range(len(ap_names))] for k in range(count)]
    else:
        mapped = [aps.get(p, p) if aps else p for p in ap_names]
        alphabet, bits_of = [], []
        for bits in itertools.product([False, True], repeat=len(ap_names)):
            bits = list(reversed(bits))
            alphabet.append(frozenset(p for p, b in zip(mapped, bits) if b))
            bits_of.append(bits)

    pos += 1
    names: Dict[int, Hashable] = {}
    marks: Dict[int, List[int]] = {}
    edges: Dict[int, List[Tuple[tuple, int]]] = {}
    current = None
    while toks[pos][1] != "--END--":
        val = toks[pos][1]
        if val == "State:":
            current = toks[pos + 1][1]
            pos += 2
            if toks[pos][0] == "str":
                names[current] = toks[pos][1]
                pos += 1
            marks[current] = []
            edges.setdefault(current, [])
            if toks[pos][1] == "{":
                pos += 1
                while toks[pos][1] != "}":
                    marks[current].append(toks[pos][1])
                    pos += 1
                pos += 1
        elif val == "[":
            p = _Expr(toks, pos + 1)
            label = p.disj(_label_atom)
            p.take("]")
            pos = p.pos
            target = toks[pos][1]
            pos += 1
            if toks[pos][1] == "{":
                raise HoaError("transition-based acceptance is not supported")
            edges[current].append((label, target))
        else:
            raise HoaError(f"unexpected token in body: {val!r}")
    if len(marks) != n_states:
        raise HoaError("state count does not match")

    state_obj = {k: names.get(k, k) for k in range(n_states)}
    if len(set(state_obj.values())) != n_states:
        state_obj = {k: k for k in range(n_states)}
    states = tuple(state_obj[k] for k in range(n_states))
    if acc_kind == "buchi":
        delta = {}
        for q, es in edges.items():
            for letter, bits in zip(alphabet, bits_of):
                targets = frozenset(state_obj[t] for lab, t in es if _eval_label(lab, bits))
                if targets:
                    delta[(state_obj[q], letter)] = targets
        acc = frozenset(state_obj[q] for q, m in marks.items() if pairs[0][1] in m)
        return NBA(states, tuple(alphabet), delta, state_obj[start], acc)
    delta = {}
    for q, es in edges.items():
        for letter, bits in zip(alphabet, bits_of):
            targets = {t for lab, t in es if _eval_label(lab, bits)}
            if len(targets) != 1:
                raise HoaError(f"state {q} is not deterministic and complete")
            delta[(state_obj[q], letter)] = state_obj[targets.pop()]
    acceptance = tuple(
        (frozenset(state_obj[q] for q, m in marks.items() if fin in m),
         frozenset(state_obj[q] for q, m in marks.items() if inf in m))
        for fin, inf in pairs
    )
    return DetAutomaton(states, tuple(alphabet), delta, state_obj[start], acceptance, acc_kind)
