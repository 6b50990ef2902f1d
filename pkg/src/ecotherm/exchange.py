"""Kinetic exchange simulation of N agents trading a conserved total.

Each step picks an ordered pair of distinct agents (i, j) and redistributes
their combined holdings according to the ensemble's rule.  The second agent
always receives ``total - m_i'``, so every exchange conserves money exactly
up to one rounding and never produces a negative holding.

Random numbers come from numpy's PCG64.  The seed is expanded with
``SeedSequence(seed).spawn(2)``: child 0 feeds the initial holdings, child 1
the dynamics.  Each step consumes three uniform doubles (u0, u1, eps):

    i = floor(u0 * N);  j = floor(u1 * (N - 1)), shifted past i;  eps = u2

Draws are taken in fixed-size blocks from one stream, so a run of a+b steps
is bitwise identical to a run of a steps followed by b steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy import stats

__all__ = [
    "RULES",
    "RNG_NAME",
    "Rule",
    "Ensemble",
    "FitResult",
    "init_ensemble",
    "run",
    "exchange_pair",
    "fit_boltzmann",
    "ks_distance",
    "hill_tail_index",
    "empirical_entropy",
    "histogram",
    "run_metadata",
]

RULES = ("uniform_pair", "fixed_transfer", "multiplicative_save")
RNG_NAME = "PCG64"
_BLOCK = 1 << 18
_KIND = {name: code for code, name in enumerate(RULES)}


@dataclass(frozen=True)
class Rule:
    """Exchange rule.  ``param`` is the transfer amount for
    ``fixed_transfer`` and the saving propensity for ``multiplicative_save``."""

    kind: str = "uniform_pair"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in RULES:
            raise ValueError(f"unknown rule {self.kind!r}; choose from {', '.join(RULES)}")
        p = float(self.param)
        if self.kind == "fixed_transfer" and not (p > 0 and math.isfinite(p)):
            raise ValueError(f"fixed_transfer needs a positive finite delta, got {p}")
        if self.kind == "multiplicative_save" and not 0 <= p <= 1:
            raise ValueError(f"multiplicative_save needs a saving fraction in [0, 1], got {p}")
        object.__setattr__(self, "param", p)

    @classmethod
    def parse(cls, text: str) -> "Rule":
        """Parse ``uniform_pair``, ``fixed_transfer(0.5)`` or ``multiplicative_save(0.5)``."""
        text = text.strip()
        if "(" not in text:
            return cls(text)
        name, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise ValueError(f"malformed rule {text!r}")
        return cls(name.strip(), float(rest[:-1]))

    def __str__(self) -> str:
        if self.kind == "uniform_pair":
            return self.kind
        return f"{self.kind}({self.param!r})"


@dataclass
class Ensemble:
    holdings: np.ndarray
    total_M: float
    rule: Rule
    rng_seed: int
    steps_done: int = 0
    rng_state: dict = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return len(self.holdings)

    @property
    def temperature(self) -> float:
        """Mean money per agent, M/N."""
        return self.total_M / self.N

    def drift(self) -> float:
        return abs(math.fsum(self.holdings) - self.total_M)


@dataclass(frozen=True)
class FitResult:
    T_hat: float
    ks_stat: float
    tail_alpha: float | None = None
    degenerate: bool = False


def init_ensemble(N: int, total_M: float, seed: int, init: str = "equal",
                  rule: Rule | str = "uniform_pair") -> Ensemble:
    """Fresh ensemble: ``equal`` gives M/N to everyone, ``random`` draws a
    uniformly random point of the simplex."""
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N}")
    if not (total_M > 0 and math.isfinite(total_M)):
        raise ValueError(f"total_M must be positive and finite, got {total_M}")
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if isinstance(rule, str):
        rule = Rule.parse(rule)
    N = int(N)
    init_ss, dyn_ss = np.random.SeedSequence(seed).spawn(2)
    if init == "equal":
        holdings = np.full(N, total_M / N)
    elif init == "random":
        w = np.random.Generator(np.random.PCG64(init_ss)).exponential(size=N)
        holdings = w * (total_M / w.sum())
        holdings[-1] = max(0.0, total_M - math.fsum(holdings[:-1]))
    else:
        raise ValueError(f"init must be 'equal' or 'random', got {init!r}")
    state = np.random.PCG64(dyn_ss).state
    return Ensemble(holdings, float(total_M), rule, int(seed), 0, state)


def exchange_pair(rule: Rule, mi: float, mj: float, eps: float) -> tuple[float, float]:
    """Holdings of (i, j) after one exchange with random number ``eps``."""
    return _exchange(_KIND[rule.kind], rule.param, mi, mj, eps)


@numba.njit(cache=True, inline="always")
def _exchange(kind, param, mi, mj, eps):
    if kind == 0:
        s = mi + mj
        new_i = eps * s
        return new_i, s - new_i
    if kind == 1:
        if mi >= param:
            return mi - param, mj + param
        return mi, mj
    s = mi + mj
    new_i = min(param * mi + eps * (1.0 - param) * s, s)
    return new_i, s - new_i


@numba.njit(cache=True)
def _kernel(holdings, draws, kind, param):
    n = holdings.shape[0]
    for k in range(draws.shape[0]):
        i = min(int(draws[k, 0] * n), n - 1)
        j = min(int(draws[k, 1] * (n - 1)), n - 2)
        if j >= i:
            j += 1
        a, b = _exchange(kind, param, holdings[i], holdings[j], draws[k, 2])
        holdings[i] = a
        holdings[j] = b


def run(ensemble: Ensemble, n_steps: int) -> Ensemble:
    """Apply ``n_steps`` pairwise exchanges; returns a new ensemble."""
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    holdings = ensemble.holdings.copy()
    bitgen = np.random.PCG64()
    bitgen.state = ensemble.rng_state
    gen = np.random.Generator(bitgen)
    kind = _KIND[ensemble.rule.kind]
    left = int(n_steps)
    while left:
        k = min(left, _BLOCK)
        _kernel(holdings, gen.random((k, 3)), kind, ensemble.rule.param)
        left -= k
    return replace(ensemble, holdings=holdings, steps_done=ensemble.steps_done + int(n_steps),
                   rng_state=bitgen.state)


def _values(source) -> np.ndarray:
    x = np.asarray(source.holdings if isinstance(source, Ensemble) else source, dtype=float)
    if x.size == 0:
        raise ValueError("empty ensemble")
    return x


def ks_distance(sample, T: float) -> float:
    """Kolmogorov-Smirnov distance between the sample and Exp(mean T)."""
    return float(stats.kstest(_values(sample), "expon", args=(0.0, T)).statistic)


def hill_tail_index(sample, tail_fraction: float) -> float:
    """Hill estimate of the power-law exponent from the largest values."""
    x = np.sort(_values(sample))[::-1]
    k = int(tail_fraction * len(x))
    if not 2 <= k < len(x) or x[k] <= 0:
        raise ValueError(f"tail_fraction {tail_fraction} leaves no usable tail")
    return float(k / np.sum(np.log(x[:k] / x[k])))


def fit_boltzmann(sample, tail_fraction: float | None = None) -> FitResult:
    """Fit the exponential law: T_hat is the mean holding, ks_stat the KS
    distance to Exp(T_hat).  All-equal holdings are flagged degenerate."""
    x = _values(sample)
    T_hat = float(np.mean(x))
    if not T_hat > 0:
        raise ValueError("holdings must have a positive mean")
    alpha = hill_tail_index(x, tail_fraction) if tail_fraction else None
    return FitResult(T_hat, ks_distance(x, T_hat), alpha, bool(np.ptp(x) == 0))


def histogram(sample, n_bins: int = 50) -> dict[str, np.ndarray]:
    """Histogram over [0, max holding] with columns bin_lo, bin_hi, count, density."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    x = _values(sample)
    top = float(x.max())
    if not top > 0:
        raise ValueError("all holdings are zero")
    count, edges = np.histogram(x, bins=n_bins, range=(0.0, top))
    width = np.diff(edges)
    return {
        "bin_lo": edges[:-1],
        "bin_hi": edges[1:],
        "count": count,
        "density": count / (len(x) * width),
    }


def empirical_entropy(sample, n_bins: int = 50) -> float:
    """Histogram estimate of the differential entropy, -sum p ln(p / w)."""
    if n_bins < 10:
        raise ValueError(f"n_bins must be >= 10, got {n_bins}")
    h = histogram(sample, n_bins)
    p = h["count"] / h["count"].sum()
    w = h["bin_hi"] - h["bin_lo"]
    occ = p > 0
    return float(-np.sum(p[occ] * np.log(p[occ] / w[occ])))


def run_metadata(ensemble: Ensemble, fit: FitResult | None = None) -> dict:
    meta = {
        "seed": ensemble.rng_seed,
        "rule": str(ensemble.rule),
        "N": ensemble.N,
        "M": ensemble.total_M,
        "steps": ensemble.steps_done,
        "rng": RNG_NAME,
    }
    if fit is not None:
        meta["T_hat"] = fit.T_hat
        meta["ks_stat"] = fit.ks_stat
        if fit.tail_alpha is not None:
            meta["tail_alpha"] = fit.tail_alpha
    return meta
