"""Command-line front end.

Subcommands ``check``, ``eval``, ``automata`` and ``simulate`` each print a
single JSON document on stdout. Logs and timing go to stderr. For ``check``
the exit code is 0 when the formula holds, 1 when it fails and 2 on error or
an unknown verdict; the other subcommands exit 0 on success and 2 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__
from .automata import StateBudgetExceeded, build_obs_nba, lift_phi_dsa, product_dsa, trim_nba
from .engine import UNDEFINED, BindingError, Engine, EngineError, QuantifierNotSupported, _negate
from .hoa import to_hoa
from .io import format_fraction, load_model, load_strategies, model_hash
from .logic import (
    Compare, Const, Degree, FullObs, ParseError, Prob, Valuation, bindings, free_vars, parse,
    parse_path, parse_term, pretty,
)
from .mc import ClassExplosion, HorizonInsufficient, McConfig, estimate
from .rcf import EncodingError, Encoder, SolverError, emit, run_solver
from .rcf.smtlib import ENCODER_VERSION
from .safra import DEFAULT_BUDGET

log = logging.getLogger("opsl")

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR = 0, 1, 2

DEFAULTS = {
    "engine": "concrete",
    "seed": 0,
    "samples": 100_000,
    "horizon": 20,
    "budget_safra": DEFAULT_BUDGET,
    "json_indent": 2,
    "solver_cmd": None,
    "solver_timeout": None,
}


class CliError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


def rational(q: Fraction) -> Dict:
    return {"rational": format_fraction(q), "decimal": float(q)}


def _read_formula(arg: str) -> str:
    """Formula text, or the contents of a file when ``arg`` names one."""
    if "\n" not in arg and len(arg) < 4096:
        p = Path(arg)
        try:
            if p.is_file():
                return p.read_text(encoding="utf-8").strip()
        except OSError:
            pass
    return arg


def _parse(kind: str, text: str):
    fn = {"history": parse, "path": parse_path, "term": parse_term}[kind]
    try:
        return fn(text)
    except ParseError as exc:
        raise CliError("parse", str(exc), line=exc.line, column=exc.column) from exc


def _valuation(phi, strategies: Dict, model) -> Valuation:
    """Bind strategy-file entries to the free variables of ``phi``.

    A key naming a variable binds that variable. A key naming an agent binds
    whatever free variable that agent is bound to in each binding of ``phi``.
    """
    free = free_vars(phi)
    table = {k: v for k, v in strategies.items() if k in free}
    for b in bindings(phi):
        for agent in model.agents:
            if agent not in strategies or not b.covers([agent]):
                continue
            var = b.variable(agent)
            if var not in free or var in strategies:
                continue
            if var in table and table[var] != strategies[agent]:
                raise CliError("binding", f"variable {var!r} receives different strategies from several agents")
            table[var] = strategies[agent]
    return Valuation(table)


def _require_bound(phi, nu: Valuation):
    missing = sorted(free_vars(phi) - set(nu))
    if missing:
        raise CliError("binding", f"no strategy given for variable(s) {', '.join(missing)}")


def _value(v) -> Optional[Dict]:
    return None if v is UNDEFINED else rational(v)


# -- subcommands --------------------------------------------------------------

def cmd_check(args, cfg, out: Dict) -> int:
    model = load_model(args.model)
    text = _read_formula(args.formula)
    phi = _parse("history", text)
    state = _state(args, model)
    out["query"].update(formula=pretty(phi), state=state)
    engine = cfg["engine"]
    if engine == "concrete":
        nu = _valuation(phi, _strategies(args), model)
        _require_bound(phi, nu)
        eng = Engine(model, budget=cfg["budget_safra"])
        result = eng.holds(state, phi, nu)
        out.update(result=result, exact=True, diagnostics={"automata": dict(sorted(eng.stats.items()))})
        return EXIT_TRUE if result else EXIT_FALSE
    if engine == "rcf":
        return _check_rcf(args, cfg, out, model, state, phi, text)
    return _check_mc(args, cfg, out, model, state, phi)


def _check_rcf(args, cfg, out, model, state, phi, text) -> int:
    enc = Encoder(model, budget=cfg["budget_safra"]).encode(state, phi)
    stats = enc.stats()
    script = emit(enc.sentence, {
        "formula": text, "state": state, "model": model_hash(model), "encoder": f"opsl {ENCODER_VERSION}",
    })
    diag = {"tree_size": stats.tree_size, "dag_size": stats.dag_size,
            "quantified_variables": stats.quantified_variables,
            "quantifier_blocks": stats.quantifier_blocks, "variables": stats.variables}
    if args.emit:
        Path(args.emit).write_text(script, encoding="utf-8", newline="\n")
        diag["script"] = args.emit
    out.update(exact=True, diagnostics=diag)
    solver = cfg["solver_cmd"]
    if not solver:
        out["result"] = None
        out["verdict"] = "unknown"
        diag["note"] = "no solver configured"
        return EXIT_ERROR
    t0 = time.perf_counter()
    verdict = run_solver(solver, script, path=args.emit, timeout=cfg["solver_timeout"])
    log.info("solver answered %s in %.3f s", verdict, time.perf_counter() - t0)
    out["verdict"] = verdict
    out["result"] = {"sat": True, "unsat": False}.get(verdict)
    return {"sat": EXIT_TRUE, "unsat": EXIT_FALSE}.get(verdict, EXIT_ERROR)


def _mc_config(cfg, mode="prob") -> McConfig:
    return McConfig(samples=cfg["samples"], horizon=cfg["horizon"], seed=cfg["seed"], mode=mode)


def _simulate_term(model, state, term, nu, cfg):
    if not isinstance(term, (Prob, Degree)):
        raise CliError("unsupported", "the mc engine estimates a single P or D term")
    _require_bound(term, nu)
    eng = Engine(model, budget=cfg["budget_safra"])
    profile = eng.profile(term.binding, nu)
    label = eng.labeller(term.path, nu)
    if isinstance(term, Prob):
        return estimate(model, state, term.path, profile, _mc_config(cfg), label=label)
    return estimate(model, state, term.path, profile, _mc_config(cfg, "degree"), agent=term.agent, label=label)


def _check_mc(args, cfg, out, model, state, phi) -> int:
    # only ``term op c`` and ``c op term`` are estimated
    if not isinstance(phi, Compare):
        raise CliError("unsupported", "the mc engine checks a comparison of a P or D term with a constant")
    if isinstance(phi.right, Const):
        term, op, c = phi.left, phi.op, Fraction(phi.right.value)
    elif isinstance(phi.left, Const):
        term, op, c = phi.right, {"<": ">", ">": "<", "=": "="}[phi.op], Fraction(phi.left.value)
    else:
        raise CliError("unsupported", "the mc engine needs a constant on one side")
    nu = _valuation(phi, _strategies(args), model)
    res = _simulate_term(model, state, term, nu, cfg)
    est, se = res.estimate, res.stderr
    if math.isnan(est):
        out.update(result=None, exact=False, diagnostics=res.as_dict())
        return EXIT_ERROR
    if op == "=":
        result = abs(est - float(c)) <= 4 * se
    else:
        result = est < float(c) if op == "<" else est > float(c)
    out.update(result=result, exact=False, diagnostics=res.as_dict())
    return EXIT_TRUE if result else EXIT_FALSE


def cmd_eval(args, cfg, out: Dict) -> int:
    model = load_model(args.model)
    term = _parse("term", _read_formula(args.formula))
    state = _state(args, model)
    out["query"].update(formula=pretty(term), state=state)
    nu = _valuation(term, _strategies(args), model)
    if cfg["engine"] == "mc":
        res = _simulate_term(model, state, term, nu, cfg)
        out.update(value={"decimal": res.estimate}, exact=False, diagnostics=res.as_dict())
        return EXIT_TRUE
    if cfg["engine"] != "concrete":
        raise CliError("unsupported", "eval runs on the concrete or mc engine")
    _require_bound(term, nu)
    eng = Engine(model, budget=cfg["budget_safra"])
    value = eng.term(state, term, nu)
    diag: Dict = {"automata": dict(sorted(eng.stats.items()))}
    if isinstance(term, Degree):
        num, den = eng.degree_parts(state, term.agent, term.path, eng.profile(term.binding, nu),
                                    eng.labeller(term.path, nu))
        diag["numerator"] = rational(num)
        diag["denominator"] = rational(den)
    out.update(value=_value(value), exact=True, diagnostics=diag)
    if value is UNDEFINED:
        out["diagnostics"]["note"] = "value undefined"
        return EXIT_ERROR
    return EXIT_TRUE


def _automata_target(text: str):
    """(path formula, agent or None) from a path formula, obs[i](...), or a P or D term."""
    for fn in (parse_term, parse):
        try:
            node = fn(text)
        except ParseError:
            continue
        if isinstance(node, (FullObs, Degree)):
            return node.path, node.agent
        if isinstance(node, Prob):
            return node.path, None
    return _parse("path", text), None


def cmd_automata(args, cfg, out: Dict) -> int:
    text = _read_formula(args.formula)
    phi, agent = _automata_target(text)
    eng = Engine(load_model(args.model) if args.model else None, budget=cfg["budget_safra"])
    out["query"].update(formula=pretty(phi))
    auts = {"nba": eng.nba(phi), "dra": eng.dra(phi), "dsa": eng.dsa(phi)}
    if agent is not None:
        if eng.model is None:
            raise CliError("usage", "observation automata need a model (-m)")
        model = eng.model
        state = _state(args, model)
        out["query"]["state"] = state
        nu = _valuation(phi, _strategies(args), model) if args.strategies else Valuation()
        _require_bound(phi, nu)
        label = eng.labeller(phi, nu)
        auts["obs_nba"] = trim_nba(build_obs_nba(model, state, agent, eng.nba(_negate(phi)), label))
        auts["obs_dsa"] = eng.obs_dsa(state, agent, phi, label)
        auts["product"] = product_dsa(lift_phi_dsa(model, state, eng.dsa(phi), label), auts["obs_dsa"])
    hoa = {k: to_hoa(a, name=f"{k} {pretty(phi)}") for k, a in auts.items()}
    out.update(
        automata={k: {"states": len(a.states), "hoa": hoa[k]} for k, a in auts.items()},
        exact=True,
    )
    if args.emit:
        Path(args.emit).write_text("".join(hoa.values()), encoding="utf-8", newline="\n")
        out["diagnostics"] = {"hoa_file": args.emit}
    return EXIT_TRUE


def cmd_simulate(args, cfg, out: Dict) -> int:
    model = load_model(args.model)
    term = _parse("term", _read_formula(args.formula))
    state = _state(args, model)
    out["query"].update(formula=pretty(term), state=state)
    nu = _valuation(term, _strategies(args), model)
    res = _simulate_term(model, state, term, nu, cfg)
    out.update(value={"decimal": res.estimate, "stderr": res.stderr}, exact=False, diagnostics=res.as_dict())
    return EXIT_TRUE


# -- plumbing -----------------------------------------------------------------

def _finite(x):
    """Replace NaN and infinities by null so the output stays valid JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def _state(args, model):
    state = args.state if args.state is not None else model.states[0]
    if state not in model.states:
        raise CliError("usage", f"unknown state {state!r}")
    return state


def _strategies(args) -> Dict:
    return load_strategies(args.strategies) if args.strategies else {}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-m", "--model", help="model JSON file")
    common.add_argument("-f", "--formula", required=True, help="formula text or a file holding it")
    common.add_argument("-s", "--state", help="state to evaluate at (default: the first state)")
    common.add_argument("--strategies", help="strategy JSON file keyed by agent or variable")
    common.add_argument("-e", "--engine", choices=("concrete", "rcf", "mc"))
    common.add_argument("--emit", help="write the SMT-LIB script (check -e rcf) or HOA text (automata) here")
    common.add_argument("--solver-cmd", help="external SMT solver command; the script path is appended")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("--budget-safra", type=int, help="cap on Safra-tree states per automaton")
    common.add_argument("--json-indent", type=int)
    common.add_argument("--config", help="JSON file with defaults for the options above")

    parser = argparse.ArgumentParser(prog="opsl", description="Model checker for opacity probabilistic strategy logic.")
    parser.add_argument("--version", action="version", version=f"opsl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="decide a history formula")
    sub.add_parser("eval", parents=[common], help="compute the exact value of a P or D term")
    sub.add_parser("automata", parents=[common], help="dump the automata of a formula in HOA")
    sub.add_parser("simulate", parents=[common], help="Monte-Carlo estimate of a P or D term")
    return parser


def resolve_config(args) -> Dict:
    """Defaults, then the config file, then ``OPSL_SOLVER``, then flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise CliError("config", f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    if os.environ.get("OPSL_SOLVER"):
        cfg["solver_cmd"] = os.environ["OPSL_SOLVER"]
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.command == "simulate":
        cfg["engine"] = "mc"
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="opsl: %(message)s")
    args = build_parser().parse_args(argv)
    out: Dict = {"command": args.command, "query": {"state": args.state, "model": args.model}}
    indent = args.json_indent if args.json_indent is not None else DEFAULTS["json_indent"]
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args)
        indent = cfg["json_indent"]
        out["engine"] = cfg["engine"]
        if args.command != "automata" and not args.model:
            raise CliError("usage", "a model (-m) is required")
        handler = {"check": cmd_check, "eval": cmd_eval, "automata": cmd_automata, "simulate": cmd_simulate}
        code = handler[args.command](args, cfg, out)
    except CliError as exc:
        out["error"] = {"kind": exc.kind, "message": str(exc), **exc.extra}
        code = EXIT_ERROR
    except (QuantifierNotSupported, BindingError, EncodingError, EngineError) as exc:
        out["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        code = EXIT_ERROR
    except (StateBudgetExceeded, HorizonInsufficient, ClassExplosion, SolverError) as exc:
        out["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        code = EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        out["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        code = EXIT_ERROR
    log.info("%s finished in %.3f s (exit %d)", args.command, time.perf_counter() - t0, code)
    if indent is not None and indent < 0:
        indent = None  # negative means compact, one line
    json.dump(_finite(out), sys.stdout, indent=indent, ensure_ascii=False, allow_nan=False)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
