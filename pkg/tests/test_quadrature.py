import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from ecotherm.errors import DivergentIntegralError, QuadratureError, ValidityError
from ecotherm.model import Interval, ModelSpec
from ecotherm.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    expectation,
    integrate,
    integrate_1d,
    moments,
    partition_function,
)

INF = math.inf


def test_rule_constants():
    # the Gauss nodes are the odd-indexed Kronrod nodes
    xg, wg = np.polynomial.legendre.leggauss(7)
    np.testing.assert_allclose(NODES[1::2], xg, atol=1e-15)
    np.testing.assert_allclose(GAUSS_WEIGHTS[1::2], wg, atol=1e-15)
    assert np.all(GAUSS_WEIGHTS[::2] == 0)
    # Kronrod rule integrates polynomials up to degree 22 exactly
    for k in range(23):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert KRONROD_WEIGHTS @ NODES**k == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize(
    "f, iv, want",
    [
        (lambda x: np.exp(-x), (0, INF), 1.0),
        (lambda x: np.exp(-x * x), (-INF, INF), math.sqrt(math.pi)),
        (lambda x: 1 / (1 + x * x), (-INF, INF), math.pi),
        (lambda x: x**-2.5, (1, INF), 1 / 1.5),
        (lambda x: 1 / np.sqrt(x), (0, 1), 2.0),
        (lambda x: np.log(x), (0, 1), -1.0),
        (lambda x: np.sin(x), (0, math.pi), 2.0),
        (lambda x: np.exp(x), (-INF, 0), 1.0),
        (lambda x: x**-1.05, (1, INF), 20.0),
    ],
)
def test_known_integrals(f, iv, want):
    res = integrate_1d(f, iv, rel_tol=1e-10)
    assert res.value == pytest.approx(want, rel=1e-9)
    assert res.abs_error_estimate <= 1e-9 * abs(want)


def test_divergent_integrals_are_reported():
    with pytest.raises(DivergentIntegralError):
        integrate_1d(lambda x: 1 / x, (1, INF))
    with pytest.raises(DivergentIntegralError):
        integrate_1d(lambda x: 1 / x, (0, 1))
    with pytest.raises(DivergentIntegralError):
        integrate_1d(lambda x: x**-1.5, (0, 1))


def test_tolerance_bounds():
    with pytest.raises(ValueError):
        integrate_1d(np.exp, (0, 1), rel_tol=0.1)
    with pytest.raises(ValueError):
        integrate_1d(np.exp, (0, 1), rel_tol=1e-16)


@pytest.mark.filterwarnings("ignore:invalid value encountered:RuntimeWarning")
def test_nan_integrand():
    with pytest.raises(QuadratureError):
        integrate_1d(lambda x: np.sqrt(x - 0.5), (0, 1))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-3.0, 3.0), st.floats(0.1, 4.0))
def test_gaussian_like_against_scipy(a, b, width):
    f = lambda x: np.exp(-a * (x - b) ** 2) * (1 + np.cos(x) ** 2)
    want, _ = sp_integrate.quad(f, b - width, b + 2 * width, epsabs=0, epsrel=1e-12)
    got = integrate_1d(f, (b - width, b + 2 * width)).value
    assert got == pytest.approx(want, rel=1e-9)


def test_multidimensional():
    f = lambda x, y, z: np.exp(-x - 2 * y - 3 * z) * (1 + x * y * z)
    # exact: 1/6 + (1*1/4*1/9)
    want = 1 / 6 + 1 / 36
    res = integrate(f, [(0, INF)] * 3, rel_tol=1e-8)
    assert res.value == pytest.approx(want, rel=1e-7)
    with pytest.raises(ValueError):
        integrate(f, [(0, 1)] * 4)


def _model(text, domain, consts=None, **kw):
    return ModelSpec.from_text(text, domain, consts or {}, **kw)


def test_moments_match_scipy_oracle():
    model = _model("c1*l1^2 + l1", [(-INF, INF)], {"c1": 0.7})
    T = 1.3
    w = lambda x: np.exp(-(0.7 * x * x + x) / T)
    q, _ = sp_integrate.quad(w, -INF, INF, epsabs=0, epsrel=1e-13)
    m1, _ = sp_integrate.quad(lambda x: (0.7 * x * x + x) * w(x), -INF, INF, epsabs=0, epsrel=1e-13)
    mo = moments(model, [T])
    assert mo.q[0] == pytest.approx(q, rel=1e-10)
    assert mo.mean_m[0] == pytest.approx(m1 / q, rel=1e-10)


@pytest.mark.parametrize("T", [0.3, 1.0, 4.0])
def test_factorized_matches_full_2d(T):
    model = _model("l1 + 2*l2^2", [(0, INF), (0, INF)])
    a = moments(model, [T], factorize=True)
    b = moments(model, [T], factorize=False)
    assert a.log_q[0] == pytest.approx(b.log_q[0], abs=1e-9)
    assert a.mean_m[0] == pytest.approx(b.mean_m[0], rel=1e-9)
    assert a.var_m[0] == pytest.approx(b.var_m[0], rel=1e-8)
    # closed form: Q = T * sqrt(pi T / 2) / 2, <m> = T + T/2
    assert math.exp(a.log_q[0]) == pytest.approx(T * math.sqrt(math.pi * T / 2) / 2, rel=1e-10)
    assert a.mean_m[0] == pytest.approx(1.5 * T, rel=1e-10)


def test_factorized_matches_full_3d():
    model = _model("l1 + 2*l2 + 3*l3 + 1", [(0, INF)] * 3)
    t0 = time.perf_counter()
    b = moments(model, [1.0], rel_tol=1e-8, factorize=False)
    assert time.perf_counter() - t0 < 30
    a = moments(model, [1.0])
    assert a.log_q[0] == pytest.approx(b.log_q[0], abs=1e-7)
    assert a.mean_m[0] == pytest.approx(b.mean_m[0], rel=1e-7)
    assert math.exp(a.log_q[0]) == pytest.approx(math.exp(-1) / 6, rel=1e-10)


def test_non_separable_2d():
    model = _model("l1*l2 + l1^2 + l2^2", [(-INF, INF), (-INF, INF)])
    # quadratic form with matrix [[1, 1/2], [1/2, 1]]: Q = pi T / sqrt(3/4)
    T = 0.8
    assert partition_function(model, T) == pytest.approx(math.pi * T / math.sqrt(0.75), rel=1e-9)


def test_spectator_variables():
    model = _model("l1", [(0, INF), (0, 2.5)])
    assert partition_function(model, 2.0) == pytest.approx(2.0 * 2.5, rel=1e-12)
    with pytest.raises(DivergentIntegralError):
        partition_function(_model("l1", [(0, INF), (0, INF)]), 1.0)


def test_measure_factor_and_large_offsets():
    model = _model("l1 + 800", [(0, INF)], measure_factor=3.0)
    mo = moments(model, [1.0])
    assert mo.log_q[0] == pytest.approx(math.log(3.0) - 800.0, rel=1e-13)
    assert mo.mean_m[0] == pytest.approx(801.0, rel=1e-12)


def test_temperature_must_be_positive():
    with pytest.raises(ValidityError):
        moments(_model("l1", [(0, INF)]), [0.0])


def test_expectation():
    model = _model("l1^2", [(0, INF)])
    assert expectation(model, 4.0, "l1^2") == pytest.approx(2.0, rel=1e-10)
    assert expectation(model, 4.0, lambda x: np.ones_like(x)) == pytest.approx(1.0, rel=1e-12)
    # <l1> = sqrt(T/pi) for this half-Gaussian
    assert expectation(model, 4.0, "l1") == pytest.approx(math.sqrt(4.0 / math.pi), rel=1e-10)


def test_interval_validation():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval(math.nan, 1.0)
