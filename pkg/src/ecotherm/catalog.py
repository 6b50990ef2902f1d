"""Closed-form thermodynamics of the built-in money-function families.

=================  ==============================  =================
family             money function m                default domain
=================  ==============================  =================
constant           c0                              [0, L_i] per var
single_linear      c1*l1                           [0, inf)
general_linear     c0 + c1*l1 + ... + cn*ln        [0, inf)^n
quadratic          c1*l1^2                         (-inf, inf)
monomial           c1*l1^delta                     [0, inf)
pareto             c1*ln(l1)                       [x, inf)
gamma              c1*l1^delta + d1*ln(l1)         [0, inf)
=================  ==============================  =================

Spectator macro-parameters collapse into ``measure_factor``, which multiplies
Q and adds ``ln(measure_factor)`` to the entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import special

from .errors import DivergentIntegralError, ValidityError
from .expr import parse_money_fn
from .model import Interval, MacroParam, ModelSpec, ThermoState

__all__ = [
    "FAMILIES",
    "FamilyParams",
    "PARETO_GUARD",
    "check_validity",
    "closed_form",
    "family_model",
    "gamma_partition",
    "gamma_poles",
    "log_gamma",
    "money_function",
    "pareto_alpha",
]

FAMILIES = (
    "constant",
    "single_linear",
    "general_linear",
    "quadratic",
    "monomial",
    "pareto",
    "gamma",
)

# relative distance below c1 that ordinary Pareto evaluations must keep
PARETO_GUARD = 1e-3


# -- log-gamma ----------------------------------------------------------------

_EULER_GAMMA = 0.57721566490153286060651209008240243
_HALF_LOG_2PI = 0.91893853320467274178032973640561764
_STIRLING = (
    1 / 12,
    -1 / 360,
    1 / 1260,
    -1 / 1680,
    1 / 1188,
    -691 / 360360,
    1 / 156,
    -3617 / 122400,
)


def _zeta(k: int, n_terms: int = 1000) -> float:
    """Riemann zeta at integer k >= 2 (partial sum plus Euler-Maclaurin tail)."""
    head = math.fsum(n ** -k for n in range(n_terms - 1, 0, -1))
    N = float(n_terms)
    tail = (
        N ** (1 - k) / (k - 1)
        + 0.5 * N ** -k
        + k * N ** (-k - 1) / 12
        - k * (k + 1) * (k + 2) * N ** (-k - 3) / 720
    )
    return head + tail


_ZETA = [0.0, 0.0] + [_zeta(k) for k in range(2, 41)]


def _lgamma1p_series(x: float) -> float:
    """ln Gamma(1 + x) for |x| <= 0.25 by its Taylor series about 0."""
    total = 0.0
    power = -x
    for k in range(2, 41):
        power *= -x  # (-x)^k
        total += _ZETA[k] * power / k
    return -_EULER_GAMMA * x + total


def _stirling(z: float) -> float:
    inv = 1.0 / z
    inv2 = inv * inv
    series = 0.0
    term = inv
    for coef in _STIRLING:
        series += coef * term
        term *= inv2
    return (z - 0.5) * math.log(z) - z + _HALF_LOG_2PI + series


def log_gamma(z: float) -> float:
    """Natural log of the Gamma function for z > 0.

    Accurate to ~1e-14 relative: a Taylor series around the zeros at
    z = 1 and z = 2, Stirling's series elsewhere after shifting z >= 10.
    """
    z = float(z)
    if not z > 0 or not math.isfinite(z):
        raise ValueError(f"log_gamma needs a positive finite argument, got {z}")
    if abs(z - 1.0) <= 0.25:
        return _lgamma1p_series(z - 1.0)
    if abs(z - 2.0) <= 0.25:
        x = z - 2.0
        return math.log1p(x) + _lgamma1p_series(x)
    if z >= 10.0:
        return _stirling(z)
    n = math.ceil(10.0 - z)
    prod = 1.0
    for k in range(n):
        prod *= z + k
    return _stirling(z + n) - math.log(prod)


def _gamma_signed_log(a: float) -> tuple[float, float]:
    """(sign, ln|Gamma(a)|) for real non-pole a, using reflection for a < 0."""
    if a > 0:
        return 1.0, log_gamma(a)
    s = math.sin(math.pi * a)
    return (1.0 if s > 0 else -1.0), math.log(math.pi) - math.log(abs(s)) - log_gamma(1.0 - a)


def _digamma(a: float) -> float:
    if a > 0:
        return float(special.digamma(a))
    return float(special.digamma(1.0 - a)) - math.pi / math.tan(math.pi * a)


def _trigamma(a: float) -> float:
    if a > 0:
        return float(special.polygamma(1, a))
    return (math.pi / math.sin(math.pi * a)) ** 2 - float(special.polygamma(1, 1.0 - a))


def _is_pole(a: float) -> bool:
    k = round(a)
    return k <= 0 and abs(a - k) <= 1e-12 * max(1.0, abs(a))


# -- parameters ---------------------------------------------------------------

@dataclass(frozen=True)
class FamilyParams:
    """Constants of one catalog family.

    ``coeffs`` holds c1..cn for ``general_linear`` (defaults to ``c1`` followed
    by ones); ``lambdas`` gives explicit domain measures L1..Ln for the
    ``constant`` family, which then exposes them as macro-parameters.
    """

    family: str
    c0: float = 0.0
    c1: float = 1.0
    d1: float = 0.0
    delta: float = 1.0
    n: int = 1
    x: float = 1.0
    coeffs: tuple[float, ...] = ()
    lambdas: tuple[float, ...] | None = None
    measure_factor: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.measure_factor > 0:
            raise ValueError("measure_factor must be positive")
        if self.family == "general_linear" and self.coeffs and len(self.coeffs) != self.n:
            raise ValueError(f"general_linear needs {self.n} coefficients, got {len(self.coeffs)}")
        if self.lambdas is not None:
            if len(self.lambdas) != self.n:
                raise ValueError(f"need {self.n} domain measures, got {len(self.lambdas)}")
            if any(not v > 0 for v in self.lambdas):
                raise ValueError("domain measures L_i must be positive")

    @property
    def linear_coeffs(self) -> tuple[float, ...]:
        if self.coeffs:
            return tuple(float(c) for c in self.coeffs)
        return (self.c1,) + (1.0,) * (self.n - 1)

    @property
    def cbar(self) -> float:
        return math.prod(self.linear_coeffs)

    def with_macro(self, name: str, value: float) -> "FamilyParams":
        if self.family == "pareto" and name == "x":
            return replace(self, x=value)
        if self.family == "constant" and self.lambdas is not None and name.startswith("L"):
            i = int(name[1:]) - 1
            lam = list(self.lambdas)
            lam[i] = value
            return replace(self, lambdas=tuple(lam))
        raise KeyError(f"family {self.family} has no macro parameter {name!r}")


def pareto_alpha(c1: float, T: float) -> float:
    """Pareto exponent alpha = c1/T - 1 (positivity is the caller's concern)."""
    return c1 / T - 1.0


def check_validity(params: FamilyParams, T: float, near_critical: bool = False,
                   continued: bool = False) -> None:
    """Raise ValidityError naming the first family condition violated at T.

    ``near_critical`` lifts the Pareto guard band T <= c1*(1 - 1e-3) (the
    integral itself still needs alpha > 0).  ``continued`` lets the Gamma
    family use the analytically continued partition function, where only
    the poles are excluded.
    """
    if not (T > 0 and math.isfinite(T)):
        raise ValidityError(f"temperature must be positive, got T = {T}", "T > 0")
    fam = params.family
    if fam in ("monomial", "gamma") and not params.delta > 0:
        raise DivergentIntegralError(f"delta = {params.delta} must be positive", "delta > 0")
    if fam in ("single_linear", "quadratic", "monomial", "pareto", "gamma") and not params.c1 > 0:
        raise ValidityError(f"c1 = {params.c1} must be positive", "c1 > 0")
    if fam == "general_linear" and any(not c > 0 for c in params.linear_coeffs):
        raise DivergentIntegralError("every c_i of a general linear model must be positive", "c_i > 0")
    if fam == "pareto":
        if not params.x > 0:
            raise ValidityError(f"Pareto lower bound x = {params.x} must be positive", "x > 0")
        alpha = pareto_alpha(params.c1, T)
        if not alpha > 0:
            raise DivergentIntegralError(
                f"Pareto partition function diverges at T = {T}: alpha = c1/T - 1 = {alpha:.6g} is not > 0",
                "alpha = c1/T - 1 > 0",
            )
        if not near_critical and T > params.c1 * (1 - PARETO_GUARD):
            raise ValidityError(
                f"T = {T} lies within the guard band below c1 = {params.c1}; "
                "pass the near-critical override to evaluate there",
                "T <= c1*(1 - 1e-3)",
            )
    if fam == "gamma":
        a = (1.0 - params.d1 / T) / params.delta
        if _is_pole(a):
            raise ValidityError(
                f"Gamma pole at T = {T}: (1 - d1/T)/delta = {a:.6g}",
                "(1 - d1/T)/delta not in {0, -1, -2, ...}",
            )
        if not continued and not a > 0:
            raise DivergentIntegralError(
                f"Gamma-family integral diverges at T = {T}: (1 - d1/T)/delta = {a:.6g} is not > 0",
                "(1 - d1/T)/delta > 0",
            )


# -- closed forms -------------------------------------------------------------

def gamma_partition(params: FamilyParams, T: float) -> float:
    """Q = factor/delta * (T/c1)^a * Gamma(a) with a = (1 - d1/T)/delta.

    Negative non-pole ``a`` is evaluated through the reflection formula
    (analytic continuation; the result may be negative).
    """
    check_validity(replace(params, family="gamma"), T, continued=True)
    a = (1.0 - params.d1 / T) / params.delta
    sign, lg = _gamma_signed_log(a)
    return sign * math.exp(math.log(params.measure_factor / params.delta) + a * math.log(T / params.c1) + lg)


def gamma_poles(d1: float, delta: float, k_max: int) -> list[float]:
    """Temperatures T = d1/(1 + k*delta), k = 0..k_max, where Q has a Gamma pole."""
    if not d1 > 0:
        return []
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return [d1 / (1.0 + k * delta) for k in range(k_max + 1)]


def _state(T, log_q, S, mean_m, C, y=None, flags=()) -> ThermoState:
    f = -T * log_q
    return ThermoState(
        T=T,
        Q=math.exp(log_q),
        f=f,
        S=S,
        mean_m=mean_m,
        C=C,
        y=dict(y or {}),
        residuals={"legendre": abs(f - (mean_m - T * S))},
        flags=tuple(flags),
    )


def closed_form(params: FamilyParams, T: float, near_critical: bool = False,
                continued: bool = False) -> ThermoState:
    """Analytic ThermoState of a catalog family at temperature T."""
    check_validity(params, T, near_critical=near_critical, continued=continued)
    fam = params.family
    T = float(T)
    ln_mf = math.log(params.measure_factor)

    if fam == "constant":
        lambdas = params.lambdas or (1.0,) * params.n
        ln_lam = ln_mf + sum(math.log(v) for v in lambdas)
        y = {}
        if params.lambdas is not None:
            y = {f"L{i + 1}": T / v for i, v in enumerate(params.lambdas)}
        return _state(T, ln_lam - params.c0 / T, ln_lam, params.c0, 0.0, y)

    if fam == "single_linear":
        log_q = math.log(T / params.c1) + ln_mf
        return _state(T, log_q, 1.0 + log_q, T, 1.0)

    if fam == "general_linear":
        n = params.n
        log_r = n * math.log(T) - math.log(params.cbar) + ln_mf
        return _state(T, log_r - params.c0 / T, n + log_r, params.c0 + n * T, float(n))

    if fam == "quadratic":
        log_q = 0.5 * math.log(math.pi * T / params.c1) + ln_mf
        S = 0.5 * (1.0 + math.log(math.pi * T / params.c1)) + ln_mf
        return _state(T, log_q, S, 0.5 * T, 0.5)

    if fam == "monomial":
        d = params.delta
        base = ln_mf - math.log(d) + log_gamma(1.0 / d)
        log_q = base + math.log(T / params.c1) / d
        S = (1.0 + math.log(T / params.c1)) / d + base
        return _state(T, log_q, S, T / d, 1.0 / d)

    if fam == "pareto":
        c1, x = params.c1, params.x
        alpha = pareto_alpha(c1, T)
        log_q = ln_mf - math.log(alpha) - alpha * math.log(x)
        S = c1 / (c1 - T) + math.log(x * T / (c1 - T)) + ln_mf
        mean_m = c1 * T / (c1 - T) + c1 * math.log(x)
        C = (c1 / (c1 - T)) ** 2
        return _state(T, log_q, S, mean_m, C, {"x": -(c1 - T) / x})

    # gamma
    c1, d1, d = params.c1, params.d1, params.delta
    a = (1.0 - d1 / T) / d
    sign, lg = _gamma_signed_log(a)
    if sign < 0:
        raise ValidityError(
            f"continued Gamma partition function is negative at T = {T} (a = {a:.6g})", "Q > 0"
        )
    log_t = math.log(T / c1)
    log_q = ln_mf - math.log(d) + a * log_t + lg
    mean_m = (d1 / d) * (log_t + _digamma(a)) + a * T
    S = log_q + mean_m / T
    C = 1.0 / d + d1 / (d * T) + (d1 / (d * T)) ** 2 * _trigamma(a)
    flags = ("continued",) if a <= 0 else ()
    return _state(T, log_q, S, mean_m, C, flags=flags)


# -- numeric counterparts -----------------------------------------------------

def family_model(params: FamilyParams) -> ModelSpec:
    """ModelSpec whose parsed money function reproduces the family numerically."""
    fam = params.family
    mf = params.measure_factor
    inf = math.inf
    if fam == "constant":
        lambdas = params.lambdas or (1.0,) * params.n
        domain = [Interval(0.0, v) for v in lambdas]
        macros = ()
        if params.lambdas is not None:
            macros = tuple(MacroParam(f"L{i + 1}", i + 1, "upper") for i in range(params.n))
        text, consts = "c0", {"c0": params.c0}
    elif fam == "single_linear":
        domain, macros = [Interval(0.0, inf)], ()
        text, consts = "c1*l1", {"c1": params.c1}
    elif fam == "general_linear":
        cs = params.linear_coeffs
        domain, macros = [Interval(0.0, inf)] * params.n, ()
        text = " + ".join(["c0"] + [f"c{i + 1}*l{i + 1}" for i in range(params.n)])
        consts = {"c0": params.c0, **{f"c{i + 1}": c for i, c in enumerate(cs)}}
    elif fam == "quadratic":
        domain, macros = [Interval(-inf, inf)], ()
        text, consts = "c1*l1^2", {"c1": params.c1}
    elif fam == "monomial":
        domain, macros = [Interval(0.0, inf)], ()
        text, consts = "c1*l1^delta", {"c1": params.c1, "delta": params.delta}
    elif fam == "pareto":
        domain, macros = [Interval(params.x, inf)], (MacroParam("x", 1, "lower"),)
        text, consts = "c1*ln(l1)", {"c1": params.c1}
    else:
        domain, macros = [Interval(0.0, inf)], ()
        text = "c1*l1^delta + d1*ln(l1)"
        consts = {"c1": params.c1, "d1": params.d1, "delta": params.delta}
    expr = parse_money_fn(text, len(domain), consts)
    return ModelSpec(expr, len(domain), tuple(domain), consts, mf, macros, params)


def money_function(params: FamilyParams) -> Callable[..., np.ndarray]:
    """Direct numpy implementation of the family's money function."""
    fam = params.family
    if fam == "constant":
        return lambda *lams: np.full(np.broadcast(*lams).shape, params.c0) if lams else params.c0
    if fam == "single_linear":
        return lambda l1: params.c1 * np.asarray(l1, dtype=float)
    if fam == "general_linear":
        cs = params.linear_coeffs
        return lambda *lams: params.c0 + sum(c * np.asarray(v, dtype=float) for c, v in zip(cs, lams))
    if fam == "quadratic":
        return lambda l1: params.c1 * np.square(l1)
    if fam == "monomial":
        return lambda l1: params.c1 * np.power(l1, params.delta)
    if fam == "pareto":
        return lambda l1: params.c1 * np.log(l1)
    return lambda l1: params.c1 * np.power(l1, params.delta) + params.d1 * np.log(l1)
