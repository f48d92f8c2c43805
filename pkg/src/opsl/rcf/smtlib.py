"""SMT-LIB 2 output for real-arithmetic sentences and external solver calls."""
from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from fractions import Fraction
from typing import Dict, List, Optional

from . import syntax as R

LOGIC = "NRA"
ENCODER_VERSION = "1"


def numeral(q: Fraction) -> str:
    q = Fraction(q)
    body = str(abs(q.numerator)) if q.denominator == 1 else f"(/ {abs(q.numerator)} {q.denominator})"
    return f"(- {body})" if q < 0 else body


def _head(node) -> str:
    if isinstance(node, R.Add):
        return "+"
    if isinstance(node, R.Mul):
        return "*"
    if isinstance(node, R.AndF):
        return "and"
    if isinstance(node, R.OrF):
        return "or"
    if isinstance(node, R.NotF):
        return "not"
    if isinstance(node, R.Rel):
        return node.op
    raise TypeError(node)


def to_sexpr(root) -> str:
    """Render a term or formula; iterative, so deep nesting is fine."""
    out: List[str] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            out.append(node)
        elif isinstance(node, R.Var):
            out.append(node.name)
        elif isinstance(node, R.Num):
            out.append(numeral(node.value))
        elif isinstance(node, R.BoolConst):
            out.append("true" if node.value else "false")
        elif isinstance(node, R.Quant):
            decls = " ".join(f"({v.name} Real)" for v in node.variables)
            out.append(f"({node.kind} ({decls}) ")
            stack.append(")")
            stack.append(node.body)
        else:
            out.append(f"({_head(node)}")
            stack.append(")")
            for c in reversed(R.children(node)):
                stack.append(c)
                stack.append(" ")
    return "".join(out)


def emit(sentence, comments: Optional[Dict[str, str]] = None) -> str:
    """A complete script: header comments, logic, one assertion, check-sat."""
    free = R.free_variables(sentence)
    if free:
        raise ValueError(f"sentence has free variables: {sorted(free)[:5]}")
    lines = []
    for key, value in (comments or {}).items():
        for part in str(value).splitlines() or [""]:
            lines.append(f"; {key}: {part}")
    lines.append(f"(set-logic {LOGIC})")
    lines.append(f"(assert {to_sexpr(sentence)})")
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


class SolverError(RuntimeError):
    pass


def run_solver(command: str, script: str, path: Optional[str] = None, timeout: Optional[float] = None) -> str:
    """Run ``command`` on the script and return ``sat``, ``unsat`` or ``unknown``.

    The script path is appended to the command. Timeouts count as unknown.
    """
    argv = shlex.split(command)
    if not argv:
        raise SolverError("empty solver command")
    cleanup = None
    if path is None:
        fd, path = tempfile.mkstemp(suffix=".smt2")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(script)
        cleanup = path
    try:
        proc = subprocess.run(argv + [path], capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return "unknown"
    except OSError as exc:
        raise SolverError(f"cannot run solver: {exc}") from exc
    finally:
        if cleanup:
            os.unlink(cleanup)
    first = proc.stdout.strip().splitlines()[0].strip() if proc.stdout.strip() else ""
    if first in ("sat", "unsat", "unknown"):
        return first
    if first == "timeout":  # z3 -T reports this on stdout
        return "unknown"
    raise SolverError(f"unexpected solver output: {(proc.stdout + proc.stderr).strip()[:200]!r}")
