"""Self-checks run by ``ecotherm verify``.

Two groups: per-family cross-checks (quadrature against closed forms) and
the numbered acceptance checks.  Every check returns a CheckResult; none
raises for a numerical failure.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

from . import exchange
from .catalog import FAMILIES, FamilyParams, closed_form, family_model, gamma_partition, gamma_poles
from .model import ModelSpec, ThermoState
from .phase import divergence_exponent, scan_temperature
from .quadrature import moments, partition_function
from .thermo import first_law_residual, thermo_state

__all__ = ["CheckResult", "FAMILY_CASES", "family_checks", "acceptance_checks", "run_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


class _Fail(Exception):
    pass


def _close(label: str, got: float, want: float, rel: float = 0.0, abs_: float = 0.0) -> float:
    err = abs(got - want)
    if not err <= max(rel * abs(want), abs_):
        raise _Fail(f"{label}: got {got:.12g}, expected {want:.12g} (error {err:.3g})")
    return err


def _run(name: str, fn: Callable[[], str]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        detail = fn()
        ok = True
    except _Fail as exc:
        detail, ok = str(exc), False
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        detail, ok = f"{type(exc).__name__}: {exc}", False
    return CheckResult(name, ok, detail, time.perf_counter() - t0)


# -- family cross-checks ------------------------------------------------------

FAMILY_CASES: dict[str, list[tuple[FamilyParams, tuple[float, ...]]]] = {
    "constant": [
        (FamilyParams("constant", c0=1.5, n=2), (0.5, 2.0)),
        (FamilyParams("constant", c0=-1.0, n=2, lambdas=(2.0, 0.5)), (0.5, 2.0)),
    ],
    "single_linear": [(FamilyParams("single_linear", c1=c1), (0.5, 1.0, 3.0)) for c1 in (0.5, 2.0)],
    "general_linear": [(FamilyParams("general_linear", c0=1.0, n=3, coeffs=(1.0, 2.0, 3.0)), (0.5, 2.0))],
    "quadratic": [(FamilyParams("quadratic", c1=c1), (0.5, 2.0)) for c1 in (0.5, 2.0)],
    "monomial": [(FamilyParams("monomial", c1=1.5, delta=d), (0.5, 2.0)) for d in (0.5, 1.0, 2.0, 3.0)],
    "pareto": [
        (FamilyParams("pareto", c1=2.0, x=1.0), (0.5, 1.0, 1.5)),
        (FamilyParams("pareto", c1=3.0, x=2.0), (1.0, 2.0)),
    ],
    "gamma": [
        (FamilyParams("gamma", c1=1.0, delta=1.0, d1=0.5), (1.0, 2.0)),
        (FamilyParams("gamma", c1=2.0, delta=2.0, d1=-0.5), (0.5, 1.5)),
    ],
}


def _compare_states(num: ThermoState, ref: ThermoState, tol: float = 1e-6) -> float:
    worst = 0.0
    for name in ("Q", "f", "S", "mean_m", "C"):
        a, b = getattr(num, name), getattr(ref, name)
        worst = max(worst, _close(f"{name} at T={ref.T:g}", a, b, abs_=tol * max(1.0, abs(b))))
    for name, b in ref.y.items():
        worst = max(worst, _close(f"y_{name} at T={ref.T:g}", num.y[name], b, abs_=tol * max(1.0, abs(b))))
    return worst


def _family_check(family: str) -> Callable[[], str]:
    def check() -> str:
        worst = 0.0
        for params, temps in FAMILY_CASES[family]:
            model = family_model(params)
            for T in temps:
                worst = max(worst, _compare_states(thermo_state(model, T), closed_form(params, T)))
        return f"max deviation {worst:.2g}"
    return check


def family_checks(family: str = "all") -> list[tuple[str, Callable[[], str]]]:
    names = FAMILIES if family == "all" else (family,)
    for n in names:
        if n not in FAMILY_CASES:
            raise ValueError(f"unknown family {n!r}; expected 'all' or one of {', '.join(FAMILIES)}")
    return [(f"family:{n}", _family_check(n)) for n in names]


# -- acceptance checks --------------------------------------------------------

_MONO_GRID = [(d, T) for d in (0.5, 1.0, 2.0, 3.0) for T in (0.5, 1.0, 2.0, 4.0)]


def _a1() -> str:
    t0 = time.perf_counter()
    worst = 0.0
    for d, T in _MONO_GRID:
        mo = moments(family_model(FamilyParams("monomial", c1=1.0, delta=d)), [T])
        worst = max(worst, _close(f"<m> (delta={d}, T={T})", mo.mean_m[0], T / d, rel=1e-6) / (T / d))
    dt = time.perf_counter() - t0
    if dt >= 1.0:
        raise _Fail(f"runtime {dt:.2f} s >= 1 s")
    return f"max rel error {worst:.2g} in {dt:.3f} s"


def _a2() -> str:
    worst = 0.0
    for d, T in _MONO_GRID:
        C = thermo_state(family_model(FamilyParams("monomial", c1=1.0, delta=d)), T).C
        worst = max(worst, _close(f"C (delta={d}, T={T})", C, 1.0 / d, abs_=1e-4))
    return f"max error {worst:.2g}"


def _a3() -> str:
    worst = 0.0
    for c1 in (0.5, 2.0):
        model = family_model(FamilyParams("single_linear", c1=c1))
        for T in (0.5, 1.0, 3.0):
            s = thermo_state(model, T)
            for label, got, want in (("Q", s.Q, T / c1), ("f", s.f, -T * math.log(T / c1)),
                                     ("S", s.S, 1 + math.log(T / c1)), ("<m>", s.mean_m, T),
                                     ("S - 1 - ln(<m>/c1)", s.S - 1 - math.log(s.mean_m / c1), 0.0)):
                worst = max(worst, _close(f"{label} (c1={c1}, T={T})", got, want, abs_=1e-6 * max(1.0, abs(want))))
    return f"max error {worst:.2g}"


def _a4() -> str:
    cs = (1.0, 2.0, 3.0)
    model = family_model(FamilyParams("general_linear", c0=1.0, n=3, coeffs=cs))
    worst = 0.0
    for T in (0.5, 1.0, 2.0):
        s = thermo_state(model, T)
        worst = max(worst, _close(f"<m> at T={T}", s.mean_m, 1.0 + 3 * T, abs_=1e-6 * (1 + 3 * T)))
        want = 3 + math.log(T**3 / math.prod(cs))
        worst = max(worst, _close(f"S at T={T}", s.S, want, abs_=1e-6 * max(1.0, abs(want))))
    return f"max error {worst:.2g}"


def _a5() -> str:
    worst = 0.0
    for c1, x, T in ((2.0, 1.0, 1.0), (3.0, 2.0, 1.0)):
        s = thermo_state(family_model(FamilyParams("pareto", c1=c1, x=x)), T)
        alpha = c1 / T - 1
        ref = {
            "Q": x ** (-alpha) / alpha,
            "S": c1 / (c1 - T) + math.log(x * T / (c1 - T)),
            "mean_m": c1 * T / (c1 - T) + c1 * math.log(x),
            "C": (c1 / (c1 - T)) ** 2,
        }
        for k, want in ref.items():
            worst = max(worst, _close(f"{k} at {(c1, x, T)}", getattr(s, k), want, abs_=1e-6 * max(1.0, abs(want))))
        worst = max(worst, _close(f"y_x at {(c1, x, T)}", s.y["x"], -(c1 - T) / x, abs_=1e-6))
        if (c1, x, T) == (2.0, 1.0, 1.0):
            _close("C at (2,1,1)", s.C, 4.0, abs_=1e-6)
            _close("y_x at (2,1,1)", s.y["x"], -1.0, abs_=1e-6)
    return f"max error {worst:.2g}"


def _a6() -> str:
    worst = 0.0
    for c1, d, T in ((1.0, 1.0, 1.0), (2.0, 2.0, 0.5), (0.5, 0.5, 3.0)):
        qg = gamma_partition(FamilyParams("gamma", c1=c1, delta=d, d1=1e-4 * T), T)
        qm = partition_function(family_model(FamilyParams("monomial", c1=c1, delta=d)), T)
        worst = max(worst, _close(f"gamma vs monomial Q (c1={c1}, delta={d}, T={T})", qg, qm, rel=1e-3) / qm)
    poles = gamma_poles(1.0, 1.0, 3)
    if poles != [1.0, 1 / 2, 1 / 3, 1 / 4]:
        raise _Fail(f"gamma_poles(1, 1, 3) = {poles}")
    return f"max rel Q deviation {worst:.2g}; poles {poles}"


def _a7() -> str:
    pareto = family_model(FamilyParams("pareto", c1=2.0, x=1.0))
    report = scan_temperature(pareto, 1.0, 1.9, 10)
    at = [p for p in report.grid if abs(p.T - 1.8) < 1e-12]
    if not at or not at[0].valid:
        raise _Fail("T = 1.8 missing from the scan grid")
    hits = report.events_of("C-divergence")
    if len(hits) != 1 or hits[0].T > 1.8 + 1e-12:
        raise _Fail(f"expected one C-divergence event starting at T <= 1.8, got {hits}")
    fine = scan_temperature(pareto, 1.0, 1.9, 46)
    slope = divergence_exponent(fine.column("T"), fine.column("C"), 2.0)
    _close("divergence exponent", slope, 2.0, abs_=0.05)
    quiet = [
        FamilyParams("monomial", c1=1.0, delta=2.0),
        FamilyParams("single_linear", c1=1.0),
        FamilyParams("general_linear", c0=1.0, n=2, coeffs=(1.0, 2.0)),
        FamilyParams("constant", c0=1.0, n=1, lambdas=(2.0,)),
    ]
    for params in quiet:
        events = scan_temperature(family_model(params), 0.1, 10.0, 25).events
        if events:
            raise _Fail(f"{params.family} scan produced events {events}")
    return f"C(1.8) = {at[0].state.C:.9g}; slope {slope:.6f}; smooth scans quiet"


def _a8() -> str:
    mono = family_model(FamilyParams("monomial", c1=1.0, delta=2.0))
    r1 = first_law_residual(mono, 1.0, dT=1e-3)
    r2 = first_law_residual(mono, 1.0, dT=5e-4)
    pareto = family_model(FamilyParams("pareto", c1=2.0, x=1.0))
    p1 = first_law_residual(pareto, 1.0, dx={"x": 1e-3})
    p2 = first_law_residual(pareto, 1.0, dx={"x": 5e-4})
    for label, a, b in (("monomial dT", r1, r2), ("pareto dx", p1, p2)):
        if not a <= 1e-5:
            raise _Fail(f"{label} residual {a:.3g} > 1e-5")
        if not b * 3 <= a:
            raise _Fail(f"{label}: halving the step gave {a:.3g} -> {b:.3g} (< 3x reduction)")
    return f"monomial {r1:.2g} -> {r2:.2g}; pareto {p1:.2g} -> {p2:.2g}"


def _a9() -> str:
    worst = 0.0
    for fam in FAMILIES:
        for params, temps in FAMILY_CASES[fam]:
            model = family_model(params)
            for T in temps:
                worst = max(worst, _close(f"{fam} S routes at T={T}",
                                          thermo_state(model, T).residuals["entropy_routes"], 0.0, abs_=1e-6))
    return f"max |S_derivative - S_direct| {worst:.2g}"


def _a10() -> str:
    t0 = time.perf_counter()
    ens = exchange.init_ensemble(10_000, 10_000.0, 42, "equal", "uniform_pair")
    entropies = [exchange.empirical_entropy(ens)]
    for target in (1_000, 1_000_000, 10_000_000):
        ens = exchange.run(ens, target - ens.steps_done)
        if target <= 1_000_000:
            entropies.append(exchange.empirical_entropy(ens))
    fit = exchange.fit_boltzmann(ens)
    dt = time.perf_counter() - t0
    if not ens.drift() <= 1e-9 * ens.total_M:
        raise _Fail(f"conservation drift {ens.drift():.3g}")
    _close("T_hat", fit.T_hat, 1.0, rel=0.03)
    if not fit.ks_stat < 0.02:
        raise _Fail(f"KS distance {fit.ks_stat:.4f} >= 0.02")
    if not entropies[0] <= entropies[1] <= entropies[2]:
        raise _Fail(f"entropy decreased across checkpoints: {entropies}")
    if dt >= 30:
        raise _Fail(f"runtime {dt:.1f} s >= 30 s")
    return f"T_hat {fit.T_hat:.6f}, KS {fit.ks_stat:.4f}, drift {ens.drift():.2g}, {dt:.2f} s"


def _a11() -> str:
    ens = exchange.init_ensemble(10_000, 10_000.0, 42, "equal", "multiplicative_save(0.5)")
    fit = exchange.fit_boltzmann(exchange.run(ens, 10_000_000))
    if not fit.ks_stat > 0.05:
        raise _Fail(f"KS distance {fit.ks_stat:.4f} does not exceed 0.05")
    return f"KS {fit.ks_stat:.4f}"


def _a12() -> str:
    parsed = ModelSpec.from_text("c1*l1^2", [(0.0, math.inf)], {"c1": 1.0})
    family = family_model(FamilyParams("monomial", c1=1.0, delta=2.0))
    worst = 0.0
    for T in (1.0, 4.0):
        a, b = thermo_state(parsed, T), thermo_state(family, T)
        for k in ("Q", "f", "S", "mean_m", "C"):
            worst = max(worst, _close(f"{k} at T={T}", getattr(a, k), getattr(b, k), abs_=1e-8))
    return f"max deviation {worst:.2g}"


ACCEPTANCE = [
    ("acceptance-1 monomial mean money", _a1),
    ("acceptance-2 monomial heat capacity", _a2),
    ("acceptance-3 single linear", _a3),
    ("acceptance-4 general linear 3-D", _a4),
    ("acceptance-5 pareto", _a5),
    ("acceptance-6 gamma limit and poles", _a6),
    ("acceptance-7 phase scan", _a7),
    ("acceptance-8 first law", _a8),
    ("acceptance-9 entropy routes", _a9),
    ("acceptance-10 kinetic simulation", _a10),
    ("acceptance-11 multiplicative saving", _a11),
    ("acceptance-12 parser equivalence", _a12),
]


def acceptance_checks() -> list[tuple[str, Callable[[], str]]]:
    return list(ACCEPTANCE)


def run_checks(checks: list[tuple[str, Callable[[], str]]],
               progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    results = []
    for name, fn in checks:
        res = _run(name, fn)
        results.append(res)
        if progress is not None:
            progress(res)
    return results
