"""Adaptive quadrature and the partition-function integrals built on it.

The integrator is a globally adaptive 15-point Gauss-Kronrod scheme that
works on *batches*: the integrand returns an array whose last axis runs over
quadrature nodes and whose leading axes are independent integrals sharing one
panel set.  Evaluating a whole temperature stencil in one batch keeps finite
differences free of subdivision noise.

Infinite ends are handled by an exponential stretch ``lam = a + expm1(u)``
(``u >= 0``), which turns power-law tails into exponentials in ``u``.  The
``u`` range is cut at ``U_CAP`` and the remaining tail is extrapolated from
the local exponential decay rate; a non-decaying tail is reported as a
divergent integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .catalog import check_validity
from .errors import DivergentIntegralError, QuadratureError, ValidityError
from .expr import (
    Add,
    MoneyExpr,
    Num,
    additive_terms,
    detect_separability,
    evaluate,
    parse_money_fn,
    split_by_groups,
    variables_of,
)
from .model import Interval, ModelSpec

__all__ = [
    "QuadResult",
    "integrate_1d",
    "integrate",
    "DEFAULT_REL_TOL",
    "MAX_SUBDIVISIONS",
    "Moments",
    "moments",
    "partition_function",
    "expectation",
]

DEFAULT_REL_TOL = 1e-10
MAX_SUBDIVISIONS = 2000
ABS_FLOOR = 1e-300
CANCELLATION_FLOOR = 1e-3
U_CAP = 700.0
# an endpoint panel that does not shrink by this fraction when halved counts as growing
GROWTH_SLACK = 1e-3
# beyond this magnitude an indeterminate (NaN) integrand value is taken as 0
FAR = 1e100

# Kronrod nodes on [0, 1); odd entries (1, 3, 5) plus the centre are the
# 7-point Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-node layout on [-1, 1]
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny

# initial breakpoints in the stretched coordinate u for a semi-infinite end
_U_BREAKS = np.array(
    [0.0, 1 / 64, 1 / 8, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 32.0, 64.0, 128.0, 256.0, U_CAP]
)


@dataclass
class QuadResult:
    """Integral value with its error estimate.

    For batched integrands ``value`` and ``abs_error_estimate`` are arrays
    with the batch shape.
    """

    value: float | np.ndarray
    abs_error_estimate: float | np.ndarray
    subdivisions: int


def _check_tol(rel_tol: float) -> None:
    if not (1e-14 < rel_tol < 1e-2):
        raise ValueError(f"rel_tol must lie in (1e-14, 1e-2), got {rel_tol}")


def _gk15(fun, a: np.ndarray, b: np.ndarray):
    """Apply the rule to panels [a_k, b_k]; returns (value, error) of shape batch + (P,)."""
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = (centre[:, None] + half[:, None] * NODES[None, :]).ravel()
    f = np.asarray(fun(x), dtype=float)
    if f.shape[-1:] != x.shape:
        raise QuadratureError(f"integrand returned shape {f.shape}; last axis must match {x.shape}")
    if not np.all(np.isfinite(f)):
        bad = ~np.isfinite(f.reshape(-1, x.size)).all(axis=0)
        raise QuadratureError(
            f"integrand produced NaN or infinite values at abscissa {x[bad][0]:.6g} "
            "(singularity too strong to resolve in double precision?)"
        )
    f = f.reshape(f.shape[:-1] + (len(a), 15))
    resk = f @ KRONROD_WEIGHTS
    resg = f @ GAUSS_WEIGHTS
    mean = resk * 0.5
    resabs = np.abs(f) @ KRONROD_WEIGHTS
    resasc = np.abs(f - mean[..., None]) @ KRONROD_WEIGHTS
    resk = resk * half
    resabs = resabs * np.abs(half)
    resasc = resasc * np.abs(half)
    err = np.abs((resk - resg * half))
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > _UFLOW / (50 * _EPS), np.maximum(err, floor), err)
    return resk, err, resabs


def _adaptive(fun, breaks: np.ndarray, rel_tol: float, max_subdivisions: int,
              watch_left: bool = False, watch_right: bool = False):
    """Globally adaptive integration over [breaks[0], breaks[-1]].

    ``watch_left``/``watch_right`` enable divergence detection at a finite
    endpoint: if the panel touching it keeps *growing* as it is halved,
    the integrand is not integrable there.
    """
    a = np.asarray(breaks[:-1], dtype=float)
    b = np.asarray(breaks[1:], dtype=float)
    val, err, l1 = _gk15(fun, a, b)
    splits = 0
    growth = {"left": 0, "right": 0}
    while True:
        total = val.sum(axis=-1)
        total_err = err.sum(axis=-1)
        # integrals that cancel to ~0 are resolved relative to their L1 norm
        tol = np.maximum(rel_tol * np.maximum(np.abs(total), CANCELLATION_FLOOR * l1.sum(axis=-1)), ABS_FLOOR)
        bad = total_err > tol
        if not np.any(bad):
            return total, total_err, splits
        # score each panel by its worst share of the tolerance over the unconverged components
        ratio = err / tol[..., None]
        ratio = np.where(bad[..., None], ratio, 0.0)
        score = ratio.reshape(-1, ratio.shape[-1]).max(axis=0)
        threshold = max(score.max() * 0.25, 1.0 / len(score))
        pick = np.flatnonzero(score >= threshold)
        widths = b[pick] - a[pick]
        pick = pick[np.abs(widths) > 4 * _EPS * np.maximum(np.abs(a[pick]), np.abs(b[pick])) + _UFLOW]
        if len(pick) == 0 or splits + len(pick) > max_subdivisions:
            raise QuadratureError(
                f"no convergence after {splits} subdivisions "
                f"(error estimate {float(np.max(total_err)):.3g}, target {float(np.min(tol)):.3g})"
            )
        mid = 0.5 * (a[pick] + b[pick])
        new_a = np.concatenate([a[pick], mid])
        new_b = np.concatenate([mid, b[pick]])
        nv, ne, nl = _gk15(fun, new_a, new_b)
        n = len(pick)
        for side, edge_idx in (("left", 0), ("right", len(a) - 1)):
            if not (watch_left if side == "left" else watch_right):
                continue
            hit = np.flatnonzero(pick == edge_idx)
            if len(hit) == 0:
                continue
            k = hit[0]
            child = nv[..., k] if side == "left" else nv[..., n + k]
            parent = val[..., edge_idx]
            # only the leading (weight) component: its panel integral is
            # scale invariant at a power-law endpoint, while log-weighted
            # moments rise for a long pre-asymptotic stretch
            if child.ndim >= 2:
                child, parent = child[0], parent[0]
            if np.any(np.abs(child) >= np.abs(parent) * (1 - GROWTH_SLACK) + ABS_FLOOR):
                growth[side] += 1
                if growth[side] >= 8:
                    raise DivergentIntegralError(
                        "integrand is not integrable at the "
                        f"{'lower' if side == 'left' else 'upper'} endpoint",
                        "integrable endpoint singularity",
                    )
            else:
                growth[side] = 0
        keep = np.ones(len(a), dtype=bool)
        keep[pick] = False
        order_a = np.concatenate([a[keep], new_a])
        order_b = np.concatenate([b[keep], new_b])
        val = np.concatenate([val[..., keep], nv], axis=-1)
        err = np.concatenate([err[..., keep], ne], axis=-1)
        l1 = np.concatenate([l1[..., keep], nl], axis=-1)
        idx = np.argsort(order_a, kind="stable")
        a, b = order_a[idx], order_b[idx]
        val, err, l1 = val[..., idx], err[..., idx], l1[..., idx]
        splits += n


def _tail(g):
    """Extrapolate the integral of g over u in [U_CAP, inf) from its decay rate."""
    u = np.array([U_CAP - 2.0, U_CAP - 1.0, U_CAP])
    h = np.abs(np.asarray(g(u), dtype=float))
    h0, h1, h2 = h[..., 0], h[..., 1], h[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        k1 = np.log(h1) - np.log(h2)
        k0 = np.log(h0) - np.log(h1)
    zero = h2 == 0
    if np.any(~zero & ~(k1 > 0)):
        raise DivergentIntegralError(
            "integrand does not decay at infinity", "integrand decays at infinity"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(zero, 0.0, h2 / np.where(zero, 1.0, k1))
        err = np.where(zero, 0.0, tail * np.abs(k0 - k1) / np.where(zero, 1.0, k1))
    return tail, np.abs(err)


def _integrate_interval(fun, iv: Interval, rel_tol: float, max_subdivisions: int):
    """Integrate a batched integrand over one interval, choosing the transform."""
    lo, hi = iv.lower, iv.upper
    if math.isfinite(lo) and math.isfinite(hi):
        breaks = np.linspace(lo, hi, 5)
        return _adaptive(fun, breaks, rel_tol, max_subdivisions, True, True)

    pieces = []
    if math.isfinite(lo):
        pieces.append((lo, 1.0))
    elif math.isfinite(hi):
        pieces.append((hi, -1.0))
    else:
        pieces = [(0.0, 1.0), (0.0, -1.0)]

    total = 0.0
    total_err = 0.0
    splits = 0
    for anchor, direction in pieces:
        def g(u, anchor=anchor, direction=direction):
            lam = anchor + direction * np.expm1(u)
            with np.errstate(all="ignore"):
                val = np.asarray(fun(lam), dtype=float) * np.exp(u)
            # inf*0 or inf-inf far out is the vanishing tail of a convergent integrand
            return np.where(np.isnan(val) & (np.abs(lam) > FAR), 0.0, val)

        # u = 0 is a genuine endpoint only when the interval is one-sided
        v, e, s = _adaptive(g, _U_BREAKS, rel_tol, max_subdivisions, watch_left=len(pieces) == 1)
        tv, te = _tail(g)
        total = total + v + tv
        total_err = total_err + e + te
        splits += s
    return total, total_err, splits


def integrate_1d(integrand: Callable, interval: Interval | Sequence[float],
                 rel_tol: float = DEFAULT_REL_TOL,
                 max_subdivisions: int = MAX_SUBDIVISIONS) -> QuadResult:
    """Integrate ``integrand`` over ``interval``.

    ``integrand`` receives a 1-D array of abscissae and must return values of
    shape ``batch + (len(x),)``; a plain scalar function vectorized over its
    argument is the common case.

    >>> r = integrate_1d(lambda x: np.exp(-x), (0, np.inf))
    >>> round(r.value, 12)
    1.0
    """
    _check_tol(rel_tol)
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    value, err, splits = _integrate_interval(integrand, iv, rel_tol, max_subdivisions)
    if np.ndim(value) == 0:
        value, err = float(value), float(err)
    return QuadResult(value, err, splits)


def integrate(integrand: Callable, intervals: Sequence[Interval | Sequence[float]],
              rel_tol: float = DEFAULT_REL_TOL,
              max_subdivisions: int = MAX_SUBDIVISIONS) -> QuadResult:
    """Iterated integration over a box of up to three dimensions.

    ``integrand(*xs)`` is called with coordinate arrays that broadcast
    against each other (outer coordinates carry extra trailing axes) and must
    return ``batch + broadcast_shape(xs)``.
    """
    _check_tol(rel_tol)
    ivs = [iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals]
    if not 1 <= len(ivs) <= 3:
        raise ValueError(f"integrate supports 1 to 3 dimensions, got {len(ivs)}")
    counter = {"splits": 0, "err": None}

    def level(fixed: list, depth: int):
        if depth == len(ivs) - 1:
            def g(x):
                xs = [f[..., None] for f in fixed] + [x]
                with np.errstate(all="ignore"):
                    val = np.asarray(integrand(*xs), dtype=float)
                far = np.zeros(np.broadcast_shapes(*[np.shape(c) for c in xs]), dtype=bool)
                for c in xs:
                    far = far | (np.abs(c) > FAR)
                return np.where(np.isnan(val) & far, 0.0, val)
        else:
            def g(x):
                return level([f[..., None] for f in fixed] + [x], depth + 1)
        v, e, s = _integrate_interval(g, ivs[depth], rel_tol, max_subdivisions)
        counter["splits"] += s
        if depth == 0:
            counter["err"] = e
        return v

    value = level([], 0)
    err = counter["err"]
    if np.ndim(value) == 0:
        value, err = float(value), float(err)
    return QuadResult(value, err, counter["splits"])


# -- partition function and expectations -----------------------------------

@dataclass
class Moments:
    """ln Q, <m> and Var(m) on a temperature batch."""

    T: np.ndarray
    log_q: np.ndarray
    mean_m: np.ndarray
    var_m: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return np.exp(self.log_q)


def _check_temperature(T) -> np.ndarray:
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if not np.all(np.isfinite(Ts)) or np.any(Ts <= 0):
        raise ValidityError(f"temperature must be positive and finite, got {T}", "T > 0")
    return Ts


def _weighted(expr: MoneyExpr, var_ids: Sequence[int], n_vars: int, constants, Ts: np.ndarray,
              observable: MoneyExpr | None = None):
    """Integrand factory: rows [w, m w, m^2 w] (or [w, g w]) with w = exp(-m/T)."""

    def fun(*xs):
        coords: list = [None] * n_vars
        for v, x in zip(var_ids, xs):
            coords[v - 1] = x
        shape = np.broadcast_shapes(*(np.shape(x) for x in xs))
        m = np.broadcast_to(np.asarray(evaluate(expr, coords, constants), dtype=float), shape)
        t = Ts.reshape((-1,) + (1,) * len(shape))
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            w = np.exp(-m / t)
            live = w > 0  # m may be inf where the weight has underflowed
            if observable is None:
                return np.stack([w, np.where(live, m * w, 0.0), np.where(live, m * m * w, 0.0)])
            g = np.broadcast_to(np.asarray(evaluate(observable, coords, constants), dtype=float), shape)
            return np.stack([w, np.where(live, g * w, 0.0)])

    return fun


def _groups(model: ModelSpec, factorize: bool):
    if not factorize:
        return None, [tuple(range(1, model.n_vars + 1))], [model.expression]
    groups = detect_separability(model.expression)
    const, parts = split_by_groups(model.expression, groups)
    groups = [tuple(sorted(g)) for g in groups]
    used = set().union(*groups) if groups else set()
    for v in range(1, model.n_vars + 1):
        if v not in used:
            groups.append((v,))
            parts.append(None)
    return const, groups, parts


def _spectator(model: ModelSpec, v: int) -> float:
    iv = model.domain[v - 1]
    if not iv.finite:
        raise DivergentIntegralError(
            f"variable l{v} does not enter the money function and its domain "
            f"[{iv.lower}, {iv.upper}] is infinite",
            f"finite domain for unused variable l{v}",
        )
    return iv.length


def moments(model: ModelSpec, T, rel_tol: float = DEFAULT_REL_TOL, factorize: bool = True) -> Moments:
    """ln Q, <m> and Var(m) for every temperature in ``T`` from one batched pass per group."""
    Ts = _check_temperature(T)
    if model.family is not None:
        for t in Ts:
            check_validity(model.family, float(t), near_critical=True)
    const, groups, parts = _groups(model, factorize)
    c = 0.0 if const is None else float(evaluate(const, [], model.constants))
    log_q = np.full(Ts.shape, math.log(model.measure_factor)) - c / Ts
    mean = np.full(Ts.shape, c)
    var = np.zeros(Ts.shape)
    for vars_, part in zip(groups, parts):
        if part is None:
            log_q += math.log(_spectator(model, vars_[0]))
            continue
        if len(vars_) > 3:
            raise ValueError(f"non-separable block of {len(vars_)} variables; at most 3 supported")
        res = integrate(
            _weighted(part, vars_, model.n_vars, model.constants, Ts),
            [model.domain[v - 1] for v in vars_],
            rel_tol,
        )
        z, m1, m2 = res.value
        if np.any(z <= 0):
            raise DivergentIntegralError("partition function is not positive", "Q > 0")
        log_q += np.log(z)
        mu = m1 / z
        mean += mu
        var += m2 / z - mu * mu
    return Moments(Ts, log_q, mean, var)


def partition_function(model: ModelSpec, T: float, rel_tol: float = DEFAULT_REL_TOL,
                       factorize: bool = True) -> float:
    """Q(T) = measure_factor * integral of exp(-m/T) over the domain."""
    mo = moments(model, T, rel_tol, factorize)
    return float(np.exp(mo.log_q[0]))


def expectation(model: ModelSpec, T: float, observable, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Mean of ``observable`` under the density exp(-m/T)/Q.

    ``observable`` may be a MoneyExpr, expression text, or a callable taking
    one coordinate array per model variable.  Expressions are split into
    summands, each integrated only over the separability groups it touches;
    callables get a full (non-factorized) integral.
    """
    Ts = _check_temperature(T)
    if Ts.size != 1:
        raise ValueError("expectation takes a single temperature")
    if model.family is not None:
        check_validity(model.family, float(Ts[0]), near_critical=True)
    if callable(observable):
        return _expectation_callable(model, Ts, observable, rel_tol)
    if isinstance(observable, str):
        observable = parse_money_fn(observable, model.n_vars, model.constants)
    const, groups, parts = _groups(model, True)
    total = 0.0
    for term in additive_terms(observable):
        tv = variables_of(term)
        if not tv:
            total += float(evaluate(term, [], model.constants))
            continue
        idx = [k for k, g in enumerate(groups) if set(g) & tv]
        vars_ = tuple(sorted(set().union(*(groups[k] for k in idx))))
        if len(vars_) > 3:
            raise ValueError("observable couples more than 3 variables")
        sub = [parts[k] for k in idx if parts[k] is not None]
        money = sub[0] if sub else Num(0.0)
        for p in sub[1:]:
            money = Add(money, p)
        res = integrate(
            _weighted(money, vars_, model.n_vars, model.constants, Ts, observable=term),
            [model.domain[v - 1] for v in vars_],
            rel_tol,
        )
        z, gz = res.value
        total += float(gz[0] / z[0])
    return total


def _expectation_callable(model: ModelSpec, Ts: np.ndarray, observable, rel_tol: float) -> float:
    if model.n_vars > 3:
        raise ValueError("callable observables support at most 3 variables")
    T = float(Ts[0])
    expr = model.expression
    consts = model.constants

    def fun(*xs):
        shape = np.broadcast_shapes(*(np.shape(x) for x in xs))
        m = np.broadcast_to(np.asarray(evaluate(expr, list(xs), consts), dtype=float), shape)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            w = np.exp(-m / T)
            g = np.broadcast_to(np.asarray(observable(*xs), dtype=float), shape)
            return np.stack([w, np.where(w > 0, g * w, 0.0)])

    res = integrate(fun, model.domain, rel_tol)
    z, gz = res.value
    return float(gz / z)
