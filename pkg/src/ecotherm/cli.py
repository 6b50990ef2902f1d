"""Command-line front end.

Subcommands: ``analyze`` (thermodynamic grid), ``scan`` (phase scan),
``simulate`` (kinetic exchange), ``verify`` (self-check suite) and
``eval`` (evaluate a money function at a point).

Exit codes: 0 success, 1 usage/model/validity error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, exchange, reports
from .catalog import FAMILIES, FamilyParams, check_validity, family_model
from .errors import EcothermError, ModelFileError, ValidityError
from .expr import eval_money_fn, parse_money_fn, to_text
from .model import Interval, MacroParam, ModelSpec
from .phase import C_THRESHOLD, S_JUMP_FACTOR, scan_temperature
from .quadrature import DEFAULT_REL_TOL
from .thermo import thermo_state
from .verification import acceptance_checks, family_checks, run_checks

__all__ = ["main", "run_command", "load_model", "parse_model", "build_parser"]

SEED_ENV = "ECOTHERM_SEED"
DEFAULT_SEED = 42

_MODEL_KEYS = {"family", "expression", "n_vars", "domain", "constants", "measure_factor", "macro_params"}

# constants each family accepts, and which of them are required
_FAMILY_CONSTANTS = {
    "constant": ({"c0"}, {"c0"}),
    "single_linear": ({"c1"}, {"c1"}),
    "general_linear": (None, {"c1"}),
    "quadratic": ({"c1"}, {"c1"}),
    "monomial": ({"c1", "delta"}, {"c1", "delta"}),
    "pareto": ({"c1", "x"}, {"c1"}),
    "gamma": ({"c1", "delta", "d1"}, {"c1", "delta", "d1"}),
}


class UsageError(EcothermError):
    pass


# -- model files --------------------------------------------------------------

def _bound(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError(f"bound {value!r} is not a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return float(value.strip())
    raise ValueError(f"bound {value!r} is not a number or 'inf'/'-inf'")


def _parse_domain(raw: Any, problems: list[str]) -> list[Interval] | None:
    if not isinstance(raw, list):
        problems.append("'domain' must be a list of [lower, upper] pairs")
        return None
    out = []
    for k, pair in enumerate(raw):
        if not (isinstance(pair, list) and len(pair) == 2):
            problems.append(f"domain[{k}] must be a [lower, upper] pair")
            continue
        try:
            out.append(Interval(_bound(pair[0]), _bound(pair[1])))
        except ValueError as exc:
            problems.append(f"domain[{k}]: {exc}")
    return out if len(out) == len(raw) else None


def _parse_constants(raw: Any, problems: list[str]) -> dict[str, float]:
    if not isinstance(raw, dict):
        problems.append("'constants' must be an object mapping names to numbers")
        return {}
    out = {}
    for name, value in raw.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            problems.append(f"constant {name!r} must be a finite number, got {value!r}")
        else:
            out[name] = float(value)
    return out


def _family_params(family: str, n_vars: int, domain: list[Interval] | None,
                   constants: dict[str, float], measure_factor: float,
                   problems: list[str]) -> FamilyParams | None:
    allowed, required = _FAMILY_CONSTANTS[family]
    if family == "general_linear":
        allowed = {"c0"} | {f"c{i + 1}" for i in range(n_vars)}
        required = {f"c{i + 1}" for i in range(n_vars)}
    missing = sorted(required - set(constants))
    if missing:
        problems.append(f"family {family} needs constants: {', '.join(missing)}")
    unknown = sorted(set(constants) - allowed)
    if unknown:
        problems.append(f"family {family} does not use constants: {', '.join(unknown)}")
    if family not in ("constant", "general_linear") and n_vars != 1:
        problems.append(f"family {family} has one variable, got n_vars = {n_vars}")
    if domain is None or missing:
        return None

    inf = math.inf
    kw: dict[str, Any] = {k: v for k, v in constants.items() if k in ("c0", "c1", "d1", "delta", "x")}
    if family == "constant":
        if any(iv.lower != 0 or not iv.finite for iv in domain):
            problems.append("family constant needs finite domains [0, L_i]")
            return None
        kw.update(n=n_vars, lambdas=tuple(iv.upper for iv in domain))
    elif family == "general_linear":
        kw.update(n=n_vars, coeffs=tuple(constants[f"c{i + 1}"] for i in range(n_vars)))
        kw.pop("c1", None)
        expected = [Interval(0.0, inf)] * n_vars
    elif family == "pareto":
        lo = domain[0].lower
        if domain[0].upper != inf or not lo > 0:
            problems.append("family pareto needs domain [[x, \"inf\"]] with x > 0")
            return None
        if "x" in constants and constants["x"] != lo:
            problems.append(f"pareto constant x = {constants['x']} disagrees with domain lower bound {lo}")
        kw["x"] = lo
    elif family == "quadratic":
        expected = [Interval(-inf, inf)]
    else:
        expected = [Interval(0.0, inf)]
    if family not in ("constant", "pareto") and list(domain) != expected:
        shown = ", ".join(f"[{iv.lower:g}, {iv.upper:g}]" for iv in expected)
        problems.append(f"family {family} is defined on {shown}")
    try:
        return FamilyParams(family, measure_factor=measure_factor, **kw)
    except ValueError as exc:
        problems.append(str(exc))
        return None


def parse_model(data: Any) -> ModelSpec:
    """Validate a decoded model document; every schema problem is reported at once."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ModelFileError(["top level must be a JSON object"])
    unknown = sorted(set(data) - _MODEL_KEYS)
    if unknown:
        problems.append(f"unknown keys: {', '.join(unknown)}")
    has_family, has_expr = "family" in data, "expression" in data
    if has_family == has_expr:
        problems.append("exactly one of 'family' or 'expression' is required")
    for key in ("n_vars", "domain"):
        if key not in data:
            problems.append(f"missing required key {key!r}")

    n_vars = data.get("n_vars")
    if "n_vars" in data and (isinstance(n_vars, bool) or not isinstance(n_vars, int) or n_vars < 1):
        problems.append(f"'n_vars' must be a positive integer, got {n_vars!r}")
        n_vars = None
    domain = _parse_domain(data["domain"], problems) if "domain" in data else None
    if domain is not None and isinstance(n_vars, int) and len(domain) != n_vars:
        problems.append(f"domain has {len(domain)} intervals but n_vars = {n_vars}")
        domain = None
    constants = _parse_constants(data.get("constants", {}), problems)
    mf = data.get("measure_factor", 1.0)
    if isinstance(mf, bool) or not isinstance(mf, (int, float)) or not (mf > 0 and math.isfinite(mf)):
        problems.append(f"'measure_factor' must be a positive finite number, got {mf!r}")
        mf = 1.0

    model = None
    if has_family and not has_expr:
        family = data["family"]
        if family not in FAMILIES:
            problems.append(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
        elif isinstance(n_vars, int):
            if "macro_params" in data:
                problems.append("family models define their own macro parameters; remove 'macro_params'")
            params = _family_params(family, n_vars, domain, constants, float(mf), problems)
            if params is not None and not problems:
                model = family_model(params)
    elif has_expr and not has_family:
        text = data["expression"]
        macros = []
        for k, mp in enumerate(data.get("macro_params", [])):
            try:
                macros.append(MacroParam(str(mp["name"]), int(mp["var"]), str(mp["bound"])))
            except (KeyError, TypeError, ValueError) as exc:
                problems.append(f"macro_params[{k}] needs name, var and bound ('lower'/'upper'): {exc}")
        if not isinstance(text, str):
            problems.append("'expression' must be a string")
        elif isinstance(n_vars, int):
            try:
                expr = parse_money_fn(text, n_vars, constants)
            except EcothermError as exc:
                problems.append(f"expression: {exc}")
            else:
                if domain is not None and not problems:
                    try:
                        model = ModelSpec(expr, n_vars, tuple(domain), constants, float(mf), tuple(macros))
                    except ValueError as exc:
                        problems.append(str(exc))
    if problems or model is None:
        raise ModelFileError(problems or ["model could not be built"])
    return model


def load_model(path: str | os.PathLike) -> ModelSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFileError([f"cannot read {path}: {exc.strerror or exc}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError([f"{path} is not valid JSON: {exc}"]) from None
    return parse_model(data)


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        # usage errors share exit code 1 with other input errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_temperatures(p: argparse.ArgumentParser, single_ok: bool) -> None:
    p.add_argument("--t-min", type=_positive, required=True, help="lowest temperature")
    p.add_argument("--t-max", type=_positive,
                   help="highest temperature" + (" (default: --t-min only)" if single_ok else ""),
                   required=not single_ok)
    p.add_argument("--steps", type=_count,
                   help="number of grid points (default 10" + (", or 1 without --t-max)" if single_ok else ")"))
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL,
                   help=f"quadrature relative tolerance (default {DEFAULT_REL_TOL:g})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ecotherm", description="Statistical-mechanics toolkit for money distributions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="thermodynamic variables on a temperature grid")
    p.add_argument("--model", required=True, help="model JSON file")
    _add_temperatures(p, single_ok=True)
    p.add_argument("--near-critical", action="store_true",
                   help="allow Pareto temperatures inside the guard band below c1")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default: from --out suffix, else csv)")
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("scan", help="phase-transition scan over temperature")
    p.add_argument("--model", required=True, help="model JSON file")
    _add_temperatures(p, single_ok=False)
    p.add_argument("--route", choices=("auto", "numeric", "closed"), default="auto",
                   help="quadrature, closed forms, or quadrature with closed-form fallback (default auto)")
    p.add_argument("--c-threshold", type=_positive, default=C_THRESHOLD,
                   help=f"heat capacity that counts as divergent (default {C_THRESHOLD:g})")
    p.add_argument("--s-jump", type=_positive, default=S_JUMP_FACTOR,
                   help="entropy-step factor over the local typical step")
    p.add_argument("--out", help="grid CSV path (default stdout)")
    p.add_argument("--events", help="events JSON path")

    p = sub.add_parser("simulate", help="kinetic exchange simulation")
    p.add_argument("--agents", type=int, default=10_000, help="number of agents N")
    p.add_argument("--money", type=_positive, default=None, help="total money M (default N)")
    p.add_argument("--steps", type=int, default=None, help="exchanges (default 1000 per agent)")
    p.add_argument("--rule", default="uniform_pair",
                   help="uniform_pair | fixed_transfer(DELTA) | multiplicative_save(S)")
    p.add_argument("--init", choices=("equal", "random"), default="equal")
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default ${SEED_ENV} if set, else {DEFAULT_SEED})")
    p.add_argument("--bins", type=int, default=50, help="histogram bins")
    p.add_argument("--tail-fraction", type=float, default=None, help="fit a Hill tail index to this top fraction")
    p.add_argument("--out", help="histogram CSV path (default stdout)")
    p.add_argument("--meta", help="run metadata JSON path (default stderr)")

    p = sub.add_parser("verify", help="closed-form and acceptance self-checks")
    p.add_argument("--family", default="all", help="family cross-checks to run: 'all' or one family name")
    p.add_argument("--no-acceptance", action="store_true", help="skip the acceptance checks")
    p.add_argument("--out", help="write a JSON report here")

    p = sub.add_parser("eval", help="evaluate a money function at a point")
    p.add_argument("--expr", required=True, help='money function, e.g. "c1*l1^2"')
    p.add_argument("--point", required=True, help="comma-separated values of l1, l2, ...")
    p.add_argument("--const", action="append", default=[], metavar="NAME=VALUE", help="constant (repeatable)")
    p.add_argument("--n-vars", type=int, help="number of variables (default: length of --point)")
    p.add_argument("--canonical", action="store_true", help="also print the canonical form")
    return parser


# -- commands -----------------------------------------------------------------

def _grid(args) -> list[float]:
    t_max = args.t_max if args.t_max is not None else args.t_min
    steps = args.steps or (1 if args.t_max is None else 10)
    if t_max < args.t_min:
        raise UsageError(f"--t-max {t_max} is below --t-min {args.t_min}")
    if steps == 1:
        if t_max != args.t_min:
            raise UsageError("a range needs --steps >= 2")
        return [args.t_min]
    return [float(T) for T in np.linspace(args.t_min, t_max, steps)]


def _check_tol(rel_tol: float) -> None:
    if not 1e-14 < rel_tol < 1e-2:
        raise UsageError(f"--rel-tol must lie in (1e-14, 1e-2), got {rel_tol}")


def _cmd_analyze(args) -> int:
    model = load_model(args.model)
    _check_tol(args.rel_tol)
    temps = _grid(args)
    if model.family is not None:
        # refuse the whole grid up front rather than fail half way through
        for T in temps:
            try:
                check_validity(model.family, T, near_critical=args.near_critical)
            except ValidityError as exc:
                raise ValidityError(f"T = {T:g}: {exc}", exc.condition) from None
    states = [thermo_state(model, T, args.rel_tol, near_critical=args.near_critical) for T in temps]
    y_names = [mp.name for mp in model.macro_params]
    fmt = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    reports.emit_report(states, fmt, args.out, y_names)
    return 0


def _cmd_scan(args) -> int:
    model = load_model(args.model)
    _check_tol(args.rel_tol)
    if args.t_max <= args.t_min:
        raise UsageError(f"--t-max {args.t_max} must exceed --t-min {args.t_min}")
    steps = args.steps or 10
    if steps < 2:
        raise UsageError("a scan needs --steps >= 2")
    report = scan_temperature(model, args.t_min, args.t_max, steps, route=args.route,
                              C_threshold=args.c_threshold, S_jump_threshold=args.s_jump,
                              rel_tol=args.rel_tol)
    reports.emit_report(report, "csv", args.out, [mp.name for mp in model.macro_params])
    if args.events:
        reports.emit_report(report, "json", args.events)
    for e in report.events:
        print(f"event {e.kind} at T = {e.T:.6g} (magnitude {e.magnitude:.6g}) {e.detail}", file=sys.stderr)
    return 0


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED


def _cmd_simulate(args) -> int:
    N = args.agents
    total = args.money if args.money is not None else float(N)
    steps = args.steps if args.steps is not None else 1000 * N
    if steps < 0:
        raise UsageError("--steps must be >= 0")
    try:
        rule = exchange.Rule.parse(args.rule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ens = exchange.init_ensemble(N, total, _seed(args), args.init, rule)
    ens = exchange.run(ens, steps)
    fit = exchange.fit_boltzmann(ens, args.tail_fraction)
    meta = exchange.run_metadata(ens, fit)
    meta["degenerate"] = fit.degenerate
    meta["empirical_entropy"] = exchange.empirical_entropy(ens, max(args.bins, 10))
    meta["conservation_drift"] = ens.drift()
    reports.emit_report(exchange.histogram(ens, args.bins), "csv", args.out)
    meta_text = reports.to_json(meta)
    if args.meta:
        reports.write_text(meta_text, args.meta)
    else:
        sys.stderr.write(meta_text)
    return 0


def _cmd_verify(args) -> int:
    try:
        checks = family_checks(args.family)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not args.no_acceptance:
        checks += acceptance_checks()

    def show(r):
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.2f} s)  {r.detail}", flush=True)

    results = run_checks(checks, show)
    failed = [r.name for r in results if not r.passed]
    if args.out:
        reports.write_text(reports.to_json([
            {"name": r.name, "passed": r.passed, "detail": r.detail, "seconds": r.seconds} for r in results
        ]), args.out)
    total = sum(r.seconds for r in results)
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
        return 2
    print(f"all {len(results)} checks passed in {total:.1f} s")
    return 0


def _cmd_eval(args) -> int:
    try:
        point = [float(v) for v in args.point.split(",")]
    except ValueError:
        raise UsageError(f"--point must be comma-separated numbers, got {args.point!r}") from None
    constants = {}
    for item in args.const:
        name, sep, value = item.partition("=")
        try:
            if not sep:
                raise ValueError
            constants[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--const expects NAME=VALUE, got {item!r}") from None
    n_vars = args.n_vars if args.n_vars is not None else len(point)
    if len(point) != n_vars:
        raise UsageError(f"--point has {len(point)} values for {n_vars} variables")
    expr = parse_money_fn(args.expr, n_vars, constants)
    if args.canonical:
        print(to_text(expr))
    print(reports.fmt_real(eval_money_fn(expr, point, constants)))
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "scan": _cmd_scan,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "eval": _cmd_eval,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    """Run one CLI invocation and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if isinstance(exc.code, int) else 1
    try:
        return _COMMANDS[args.command](args)
    except ValidityError as exc:
        msg = str(exc)
        if exc.condition:
            msg += f"\n  violated condition: {exc.condition}"
        print(f"ecotherm {args.command}: error: {msg}", file=sys.stderr)
        return 1
    except (EcothermError, ValueError, OSError) as exc:
        print(f"ecotherm {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
