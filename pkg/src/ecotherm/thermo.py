"""Thermodynamic variables by numerical differentiation of the free money.

All temperature derivatives use a five-point stencil ``T + k*h``
(k = -2..2, ``h = max(1e-4*T, 1e-7)``) evaluated in a single batched
quadrature pass, followed by one level of Richardson extrapolation.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .catalog import check_validity, closed_form
from .errors import ValidityError
from .model import ModelSpec, ThermoState
from .quadrature import DEFAULT_REL_TOL, Moments, moments

__all__ = [
    "ThermoState",
    "step_size",
    "free_money",
    "entropy",
    "mean_money",
    "heat_capacity",
    "intensive_vars",
    "thermo_state",
    "first_law_residual",
]


def step_size(value: float) -> float:
    return max(1e-4 * abs(value), 1e-7)


def _richardson(v: np.ndarray, h: float) -> float:
    """Derivative at the centre of a five-point stencil v(-2h..2h)."""
    d1 = (v[3] - v[1]) / (2 * h)
    d2 = (v[4] - v[0]) / (4 * h)
    return float((4 * d1 - d2) / 3)


def _guard(model: ModelSpec, T: float, near_critical: bool) -> None:
    if model.family is not None:
        check_validity(model.family, T, near_critical=near_critical)
    elif not (T > 0 and math.isfinite(T)):
        raise ValidityError(f"temperature must be positive, got T = {T}", "T > 0")


def _stencil_moments(model: ModelSpec, T: float, rel_tol: float) -> tuple[Moments, float]:
    h = step_size(T)
    Ts = T + h * np.arange(-2, 3)
    return moments(model, Ts, rel_tol), h


def free_money(model: ModelSpec, T: float, rel_tol: float = DEFAULT_REL_TOL,
               near_critical: bool = False) -> float:
    """f = -T ln Q."""
    _guard(model, T, near_critical)
    mo = moments(model, [T], rel_tol)
    return float(-T * mo.log_q[0])


def entropy(model: ModelSpec, T: float, method: str = "derivative",
            rel_tol: float = DEFAULT_REL_TOL, near_critical: bool = False) -> float:
    """Entropy either as -df/dT (``"derivative"``) or as <-ln rho> = ln Q + <m>/T (``"direct"``)."""
    _guard(model, T, near_critical)
    if method == "direct":
        mo = moments(model, [T], rel_tol)
        return float(mo.log_q[0] + mo.mean_m[0] / T)
    if method != "derivative":
        raise ValueError(f"method must be 'derivative' or 'direct', got {method!r}")
    mo, h = _stencil_moments(model, T, rel_tol)
    return -_richardson(-mo.T * mo.log_q, h)


def mean_money(model: ModelSpec, T: float, rel_tol: float = DEFAULT_REL_TOL,
               near_critical: bool = False) -> float:
    _guard(model, T, near_critical)
    return float(moments(model, [T], rel_tol).mean_m[0])


def heat_capacity(model: ModelSpec, T: float, method: str = "numeric",
                  rel_tol: float = DEFAULT_REL_TOL, near_critical: bool = False) -> float:
    """C = T dS/dT.

    ``"numeric"`` differentiates the directly integrated entropy;
    ``"closed"`` uses the catalog formula (family models only).
    """
    _guard(model, T, near_critical)
    if method == "closed":
        if model.family is None:
            raise ValueError("closed-form heat capacity needs a catalog family model")
        return closed_form(model.family, T, near_critical=near_critical).C
    if method != "numeric":
        raise ValueError(f"method must be 'numeric' or 'closed', got {method!r}")
    mo, h = _stencil_moments(model, T, rel_tol)
    s_direct = mo.log_q + mo.mean_m / mo.T
    return T * _richardson(s_direct, h)


def intensive_vars(model: ModelSpec, T: float, rel_tol: float = DEFAULT_REL_TOL,
                   near_critical: bool = False) -> dict[str, float]:
    """y_i = -df/dx_i for every declared macro-parameter.

    Variables integrated over their whole range have no macro-parameter and
    therefore no entry (their intensive variable is zero by convention).
    """
    _guard(model, T, near_critical)
    out = {}
    for mp in model.macro_params:
        b = model.bound_value(mp)
        h = step_size(b)
        f = np.array([
            -T * moments(model.with_macro(mp.name, b + k * h), [T], rel_tol).log_q[0]
            for k in range(-2, 3)
        ])
        out[mp.name] = -_richardson(f, h)
    return out


def thermo_state(model: ModelSpec, T: float, rel_tol: float = DEFAULT_REL_TOL,
                 near_critical: bool = False) -> ThermoState:
    """All thermodynamic variables at T from one batched stencil integration.

    ``S`` is the derivative route -df/dT so that the Legendre residual
    ``|f - (<m> - T S)|`` is a genuine numerical check.  ``C`` differentiates
    the direct entropy, which carries a single quadrature error.
    """
    _guard(model, T, near_critical)
    mo, h = _stencil_moments(model, T, rel_tol)
    f_st = -mo.T * mo.log_q
    s_direct = mo.log_q + mo.mean_m / mo.T
    f = float(f_st[2])
    S = -_richardson(f_st, h)
    mean_m = float(mo.mean_m[2])
    C = T * _richardson(s_direct, h)
    y = intensive_vars(model, T, rel_tol, near_critical=True) if model.macro_params else {}
    residuals = {
        "legendre": abs(f - (mean_m - T * S)),
        "entropy_routes": abs(S - float(s_direct[2])),
        "heat_capacity_fluctuation": abs(C - float(mo.var_m[2]) / T**2),
    }
    return ThermoState(T=float(T), Q=float(math.exp(mo.log_q[2])), f=f, S=S, mean_m=mean_m,
                       C=C, y=y, residuals=residuals)


def first_law_residual(model: ModelSpec, T: float, dT: float = 0.0,
                       dx: Mapping[str, float] | None = None,
                       rel_tol: float = DEFAULT_REL_TOL, near_critical: bool = False) -> float:
    """|d<m> - T dS + sum_i y_i dx_i| across a finite step centred on (T, x).

    The end states sit at ``T -/+ dT/2`` and ``x_i -/+ dx_i/2``; T and y are
    taken at the midpoint.  The residual is O(step^3) for smooth models.
    """
    _guard(model, T, near_critical)
    dx = dict(dx or {})

    def shifted(sign: float) -> ModelSpec:
        m = model
        for name, step in dx.items():
            m = m.with_macro(name, model.bound_value(model.macro(name)) + sign * step / 2)
        return m

    Ta, Tb = T - dT / 2, T + dT / 2
    if dx:
        ma = moments(shifted(-1.0), [Ta], rel_tol)
        mb = moments(shifted(1.0), [Tb], rel_tol)
        mean = (ma.mean_m[0], mb.mean_m[0])
        S = (ma.log_q[0] + ma.mean_m[0] / Ta, mb.log_q[0] + mb.mean_m[0] / Tb)
    else:
        mo = moments(model, [Ta, Tb], rel_tol)
        mean = tuple(mo.mean_m)
        S = tuple(mo.log_q + mo.mean_m / mo.T)
    work = 0.0
    if dx:
        y = intensive_vars(model, T, rel_tol, near_critical=True)
        work = sum(y[name] * step for name, step in dx.items())
    return abs((mean[1] - mean[0]) - T * (S[1] - S[0]) + work)
