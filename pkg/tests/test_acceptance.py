"""Acceptance criteria 1-12.

Expected values come from closed forms written out here, independently of
the catalog module.  Each criterion prints one PASS/FAIL line; the lines are
also collected and repeated in the pytest terminal summary.  Run this file
directly (``python tests/test_acceptance.py``) for the lines alone.
"""

import math
import sys
import time

import pytest

from ecotherm import exchange
from ecotherm.catalog import FamilyParams, family_model, gamma_partition, gamma_poles
from ecotherm.model import ModelSpec
from ecotherm.phase import divergence_exponent, scan_temperature
from ecotherm.quadrature import moments, partition_function
from ecotherm.thermo import first_law_residual, thermo_state

RESULTS: list[str] = []
INF = math.inf


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def monomial(delta, c1=1.0):
    return family_model(FamilyParams("monomial", c1=c1, delta=delta))


GRID = [(d, T) for d in (0.5, 1.0, 2.0, 3.0) for T in (0.5, 1.0, 2.0, 4.0)]


def test_criterion_01_monomial_mean_money():
    t0 = time.perf_counter()
    errs = [abs(moments(monomial(d), [T]).mean_m[0] - T / d) / (T / d) for d, T in GRID]
    dt = time.perf_counter() - t0
    record(1, "monomial <m> = T/delta", max(errs) <= 1e-6 and dt < 1.0,
           f"max rel error {max(errs):.2e}, runtime {dt:.3f} s")


def test_criterion_02_monomial_heat_capacity():
    errs = [abs(thermo_state(monomial(d), T).C - 1 / d) for d, T in GRID]
    record(2, "monomial C = 1/delta", max(errs) <= 1e-4, f"max error {max(errs):.2e}")


def test_criterion_03_single_linear():
    worst = 0.0
    for c1 in (0.5, 1.0, 2.0):
        model = family_model(FamilyParams("single_linear", c1=c1))
        for T in (0.5, 1.0, 3.0):
            s = thermo_state(model, T)
            Q = T / c1
            want = {"Q": Q, "f": -T * math.log(Q), "S": 1 + math.log(Q), "mean_m": T}
            for k, v in want.items():
                worst = max(worst, abs(getattr(s, k) - v) / max(1.0, abs(v)))
            worst = max(worst, abs(s.S - (1 + math.log(s.mean_m / c1))))
    record(3, "single linear Q, f, S, <m> and S = 1 + ln(<m>/c1)", worst <= 1e-6, f"max error {worst:.2e}")


def test_criterion_04_general_linear():
    cs = (0.5, 2.0, 3.0)
    cbar = math.prod(cs)
    model = family_model(FamilyParams("general_linear", c0=1.0, n=3, coeffs=cs))
    worst = 0.0
    for T in (0.5, 1.0, 2.0):
        s = thermo_state(model, T)
        worst = max(worst, abs(s.mean_m - (1.0 + 3 * T)) / (1 + 3 * T))
        worst = max(worst, abs(s.S - (3 + math.log(T**3 / cbar))))
    record(4, "general linear n=3 <m> = c0 + nT, S = n + ln(T^n/cbar)", worst <= 1e-6, f"max error {worst:.2e}")


def test_criterion_05_pareto():
    worst = 0.0
    c_211 = y_211 = None
    for c1, x, T in ((2.0, 1.0, 1.0), (3.0, 2.0, 1.0)):
        s = thermo_state(family_model(FamilyParams("pareto", c1=c1, x=x)), T)
        alpha = c1 / T - 1
        Q = x ** (-alpha) / alpha
        mean = c1 * T / (c1 - T) + c1 * math.log(x)
        want = {
            "Q": Q,
            "mean_m": mean,
            "S": math.log(Q) + mean / T,
            "C": (c1 / (c1 - T)) ** 2,
        }
        for k, v in want.items():
            worst = max(worst, abs(getattr(s, k) - v) / max(1.0, abs(v)))
        # y = T d(ln Q)/dx = -T alpha / x
        worst = max(worst, abs(s.y["x"] - (-T * alpha / x)))
        if (c1, x, T) == (2.0, 1.0, 1.0):
            c_211, y_211 = s.C, s.y["x"]
    ok = worst <= 1e-6 and abs(c_211 - 4) <= 1e-6 and abs(y_211 + 1) <= 1e-6
    record(5, "pareto Q, S, <m>, y_x, C", ok, f"max error {worst:.2e}; C(2,1,1) = {c_211:.9f}, y_x = {y_211:.9f}")


def test_criterion_06_gamma():
    worst = 0.0
    for c1, d, T in ((1.0, 1.0, 1.0), (2.0, 2.0, 0.5), (0.5, 0.5, 3.0), (1.5, 3.0, 2.0)):
        qg = gamma_partition(FamilyParams("gamma", c1=c1, delta=d, d1=1e-4 * T), T)
        qm = math.gamma(1 / d) / d * (T / c1) ** (1 / d)
        qn = partition_function(monomial(d, c1), T)
        worst = max(worst, abs(qg - qm) / qm, abs(qg - qn) / qn)
    poles = gamma_poles(1, 1, 3)
    ok = worst <= 1e-3 and poles == [1.0, 1 / 2, 1 / 3, 1 / 4]
    record(6, "gamma Q -> monomial Q as d1 -> 0; poles d1/(1+k delta)", ok,
           f"max rel deviation {worst:.2e}; gamma_poles(1, 1, 3) = {poles}")


def test_criterion_07_phase_scan():
    pareto = family_model(FamilyParams("pareto", c1=2.0, x=1.0))
    coarse = scan_temperature(pareto, 1.0, 1.9, 10)
    point = next(p for p in coarse.grid if abs(p.T - 1.8) < 1e-12)
    hits = coarse.events_of("C-divergence")
    detected = point.state.C >= 100 * (1 - 1e-6) and len(hits) == 1 and hits[0].T <= 1.8 + 1e-12
    fine = scan_temperature(pareto, 1.0, 1.9, 46)
    slope = divergence_exponent(fine.column("T"), fine.column("C"), 2.0)
    quiet = {}
    for params in (
        FamilyParams("monomial", c1=1.0, delta=2.0),
        FamilyParams("single_linear", c1=1.0),
        FamilyParams("general_linear", c0=1.0, n=3, coeffs=(1.0, 2.0, 3.0)),
        FamilyParams("constant", c0=1.0, n=2, lambdas=(1.0, 2.0)),
    ):
        quiet[params.family] = len(scan_temperature(family_model(params), 0.1, 10.0, 25).events)
    ok = detected and abs(slope - 2) <= 0.05 and not any(quiet.values())
    record(7, "pareto C divergence and quiet smooth scans", ok,
           f"C(1.8) = {point.state.C:.9f}, event at T = {hits[0].T if hits else None}, "
           f"slope {slope:.5f}, smooth-scan events {quiet}")


def test_criterion_08_first_law():
    mono = monomial(2.0)
    pareto = family_model(FamilyParams("pareto", c1=2.0, x=1.0))
    r = [first_law_residual(mono, 1.0, dT=1e-3), first_law_residual(mono, 1.0, dT=5e-4)]
    p = [first_law_residual(pareto, 1.0, dx={"x": 1e-3}), first_law_residual(pareto, 1.0, dx={"x": 5e-4})]
    ok = max(r[0], p[0]) <= 1e-5 and r[0] >= 3 * r[1] and p[0] >= 3 * p[1]
    record(8, "first-law residual", ok,
           f"monomial {r[0]:.2e} -> {r[1]:.2e} (x{r[0] / r[1]:.1f}), pareto {p[0]:.2e} -> {p[1]:.2e} (x{p[0] / p[1]:.1f})")


def test_criterion_09_entropy_routes():
    cases = [
        (FamilyParams("constant", c0=1.0, n=2, lambdas=(2.0, 0.5)), (0.3, 1.0, 5.0)),
        (FamilyParams("single_linear", c1=2.0), (0.3, 1.0, 5.0)),
        (FamilyParams("general_linear", c0=1.0, n=3, coeffs=(1.0, 2.0, 3.0)), (0.3, 1.0, 5.0)),
        (FamilyParams("quadratic", c1=0.5), (0.3, 1.0, 5.0)),
        (FamilyParams("monomial", c1=1.0, delta=1.5), (0.3, 1.0, 5.0)),
        (FamilyParams("pareto", c1=2.0, x=1.0), (0.3, 1.0, 1.9)),
        (FamilyParams("gamma", c1=1.0, delta=1.0, d1=0.5), (0.7, 1.0, 5.0)),
        (FamilyParams("gamma", c1=1.0, delta=2.0, d1=-1.0), (0.3, 1.0, 5.0)),
    ]
    worst = 0.0
    for params, temps in cases:
        model = family_model(params)
        for T in temps:
            s = thermo_state(model, T, near_critical=True)
            mo = moments(model, [T])
            direct = mo.log_q[0] + mo.mean_m[0] / T
            worst = max(worst, abs(s.S - direct))
    record(9, "entropy -df/dT = <-ln rho>", worst <= 1e-6, f"max difference {worst:.2e} over all families")


def test_criterion_10_kinetic_simulation():
    t0 = time.perf_counter()
    ens = exchange.init_ensemble(10_000, 10_000.0, 42)
    entropy = [exchange.empirical_entropy(ens)]
    ens = exchange.run(ens, 1_000)
    entropy.append(exchange.empirical_entropy(ens))
    ens = exchange.run(ens, 1_000_000 - 1_000)
    entropy.append(exchange.empirical_entropy(ens))
    ens = exchange.run(ens, 10_000_000 - 1_000_000)
    fit = exchange.fit_boltzmann(ens)
    dt = time.perf_counter() - t0
    drift = abs(math.fsum(ens.holdings) - 10_000.0)
    ok = (drift <= 1e-9 * 10_000 and abs(fit.T_hat - 1) <= 0.03 and fit.ks_stat < 0.02
          and entropy[0] <= entropy[1] <= entropy[2] and dt < 30)
    record(10, "uniform_pair equilibrium is exponential", ok,
           f"drift {drift:.1e}, T_hat {fit.T_hat:.6f}, KS {fit.ks_stat:.4f}, "
           f"entropy {entropy[0]:.3f} <= {entropy[1]:.3f} <= {entropy[2]:.3f}, {dt:.2f} s")


def test_criterion_11_multiplicative_saving():
    ens = exchange.init_ensemble(10_000, 10_000.0, 42, rule="multiplicative_save(0.5)")
    fit = exchange.fit_boltzmann(exchange.run(ens, 10_000_000))
    record(11, "multiplicative_save(0.5) rejects the exponential", fit.ks_stat > 0.05, f"KS {fit.ks_stat:.4f}")


def test_criterion_12_parser_equivalence():
    parsed = ModelSpec.from_text("c1*l1^2", [(0.0, INF)], {"c1": 1.0})
    worst = closed = 0.0
    for T in (1.0, 4.0):
        a, b = thermo_state(parsed, T), thermo_state(monomial(2.0), T)
        worst = max(worst, *(abs(getattr(a, k) - getattr(b, k)) for k in ("Q", "f", "S", "mean_m", "C")))
        # both must also be the half-Gaussian
        half_gauss = 0.5 * math.sqrt(math.pi * T)
        closed = max(closed, abs(a.Q - half_gauss) / half_gauss)
    record(12, "parsed c1*l1^2 equals monomial delta=2", worst <= 1e-8 and closed <= 1e-8,
           f"max deviation {worst:.2e}; half-Gaussian Q error {closed:.2e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
