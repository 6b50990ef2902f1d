"""Temperature scans and phase-transition candidate detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import closed_form, gamma_poles
from .errors import DivergentIntegralError, EcothermError, QuadratureError
from .model import ModelSpec, ThermoState
from .quadrature import DEFAULT_REL_TOL
from .thermo import thermo_state

__all__ = [
    "EVENT_KINDS",
    "C_THRESHOLD",
    "S_JUMP_FACTOR",
    "Event",
    "ScanPoint",
    "PhaseScanReport",
    "scan_temperature",
    "detect_events",
    "predicted_gamma_poles",
    "pareto_critical",
    "divergence_exponent",
]

EVENT_KINDS = ("C-divergence", "S-jump", "validity-boundary", "gamma-pole-predicted")
C_THRESHOLD = 100.0
S_JUMP_FACTOR = 10.0
# threshold comparisons absorb derivative noise of this relative size
THRESHOLD_SLACK = 1e-6
NEAR_POLE = 1e-2


@dataclass(frozen=True)
class Event:
    T: float
    kind: str
    magnitude: float
    detail: str = ""


@dataclass
class ScanPoint:
    T: float
    state: ThermoState | None = None
    failure: str | None = None

    @property
    def valid(self) -> bool:
        return self.state is not None


@dataclass
class PhaseScanReport:
    grid: list[ScanPoint]
    events: list[Event] = field(default_factory=list)

    def valid_points(self) -> list[ScanPoint]:
        return [p for p in self.grid if p.valid]

    def column(self, name: str) -> np.ndarray:
        """Values of a ThermoState field along the grid (NaN at failures)."""
        return np.array([getattr(p.state, name) if p.valid else np.nan for p in self.grid])

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


def pareto_critical(c1: float) -> float:
    """Critical temperature T_c = c1 of the Pareto family."""
    if not c1 > 0:
        raise ValueError(f"c1 must be positive, got {c1}")
    return float(c1)


def predicted_gamma_poles(d1: float, delta: float, T_min: float, T_max: float,
                          k_max: int | None = None) -> list[float]:
    """Pole temperatures d1/(1 + k delta), k = 0..k_max, inside [T_min, T_max].

    ``k_max=None`` takes every pole in the range.
    """
    if not d1 > 0:
        return []
    if k_max is None:
        k_max = max(0, math.ceil((d1 / T_min - 1.0) / delta))
    return [T for T in gamma_poles(d1, delta, k_max) if T_min <= T <= T_max]


def _gamma_point(model: ModelSpec, T: float, rel_tol: float) -> ScanPoint:
    fam = model.family
    a = (1.0 - fam.d1 / T) / fam.delta
    try:
        if a > 0:
            try:
                state = thermo_state(model, T, rel_tol, near_critical=True)
            except QuadratureError:
                # endpoint singularity too sharp for bisection in doubles
                state = closed_form(fam, T)
                state.flags = state.flags + ("closed-form",)
        else:
            state = closed_form(fam, T, continued=True)
    except EcothermError as exc:
        return ScanPoint(T, failure=str(exc))
    k = round(a)
    if k <= 0 and abs(a - k) < NEAR_POLE:
        state.flags = state.flags + ("near-pole",)
    return ScanPoint(T, state)


def scan_temperature(model: ModelSpec, T_min: float, T_max: float, steps: int,
                     route: str = "auto", C_threshold: float = C_THRESHOLD,
                     S_jump_threshold: float = S_JUMP_FACTOR,
                     rel_tol: float = DEFAULT_REL_TOL,
                     pole_k_max: int | None = 3) -> PhaseScanReport:
    """Evaluate ThermoStates on a uniform T grid and flag singular behaviour.

    Per-point failures are recorded in the grid, never raised.  Scans run
    with the near-critical override.  ``route``:

    * ``"numeric"`` -- quadrature everywhere;
    * ``"closed"`` -- catalog closed forms (family models only);
    * ``"auto"`` -- quadrature, except that Gamma-family points whose
      integral diverges use the analytically continued closed form (flag
      ``"continued"``) and points quadrature cannot resolve use the plain
      closed form (flag ``"closed-form"``).

    Gamma-family scans also carry predicted pole events for
    ``k = 0..pole_k_max`` (``None`` for all poles in range).
    """
    if not (0 < T_min < T_max):
        raise ValueError(f"need 0 < T_min < T_max, got {T_min}, {T_max}")
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    if route not in ("auto", "numeric", "closed"):
        raise ValueError(f"unknown route {route!r}")
    if route == "closed" and model.family is None:
        raise ValueError("closed route needs a catalog family model")

    grid = []
    for T in np.linspace(T_min, T_max, steps):
        T = float(T)
        if route == "auto" and model.family is not None and model.family.family == "gamma":
            grid.append(_gamma_point(model, T, rel_tol))
            continue
        try:
            if route == "closed":
                state = closed_form(model.family, T, near_critical=True, continued=True)
            else:
                state = thermo_state(model, T, rel_tol, near_critical=True)
            grid.append(ScanPoint(T, state))
        except (EcothermError, ArithmeticError) as exc:
            grid.append(ScanPoint(T, failure=str(exc)))

    report = PhaseScanReport(grid)
    events = detect_events(report, C_threshold, S_jump_threshold)
    fam = model.family
    if fam is not None and fam.family == "gamma":
        for T in predicted_gamma_poles(fam.d1, fam.delta, T_min, T_max, pole_k_max):
            k = round((fam.d1 / T - 1.0) / fam.delta)
            events.append(Event(T, "gamma-pole-predicted", float(k), f"Gamma pole k = {k}"))
    report.events = sorted(events, key=lambda e: (e.T, EVENT_KINDS.index(e.kind)))
    return report


def detect_events(report: PhaseScanReport, C_threshold: float = C_THRESHOLD,
                  S_jump_threshold: float = S_JUMP_FACTOR) -> list[Event]:
    """Flag second-order candidates (|C| above threshold), first-order
    candidates (entropy steps far above the local typical step) and
    validity boundaries between valid and failed grid points.

    A contiguous run of points above the C threshold is one event, placed
    at the first point of the run.  The S-jump reference is the median of
    the up to four neighbouring steps, so smooth divergences (whose steps
    grow gradually) are not mistaken for jumps.
    """
    grid = report.grid
    if sum(p.valid for p in grid) < 3:
        return []
    events: list[Event] = []

    run_start = None
    run_max = 0.0
    for i, p in enumerate(grid + [ScanPoint(math.nan)]):
        above = p.valid and abs(p.state.C) >= C_threshold * (1 - THRESHOLD_SLACK)
        if above:
            if run_start is None:
                run_start, run_max = i, 0.0
            run_max = max(run_max, abs(p.state.C))
        elif run_start is not None:
            events.append(Event(grid[run_start].T, "C-divergence", run_max,
                                f"|C| >= {C_threshold:g} over {i - run_start} grid point(s)"))
            run_start = None

    steps = []
    for k in range(len(grid) - 1):
        a, b = grid[k], grid[k + 1]
        if a.valid and b.valid:
            steps.append(abs(b.state.S - a.state.S))
        else:
            steps.append(math.nan)
    for k, d in enumerate(steps):
        if math.isnan(d):
            continue
        scale = 1.0 + abs(grid[k].state.S)
        if d <= 1e-8 * scale:
            continue
        neighbours = [steps[j] for j in range(k - 2, k + 3)
                      if j != k and 0 <= j < len(steps) and not math.isnan(steps[j])]
        if not neighbours:
            continue
        typical = float(np.median(neighbours))
        if d >= S_jump_threshold * max(typical, 1e-12 * scale):
            events.append(Event(0.5 * (grid[k].T + grid[k + 1].T), "S-jump", d,
                                f"|dS| = {d:.6g} vs typical {typical:.6g}"))

    for k in range(len(grid) - 1):
        a, b = grid[k], grid[k + 1]
        if a.valid != b.valid:
            bad = b if a.valid else a
            events.append(Event(0.5 * (a.T + b.T), "validity-boundary", 0.0, bad.failure or ""))

    return sorted(events, key=lambda e: (e.T, EVENT_KINDS.index(e.kind)))


def divergence_exponent(T: np.ndarray, C: np.ndarray, T_c: float) -> float:
    """Slope of ln C against -ln(T_c - T): the power with which C diverges at T_c."""
    T = np.asarray(T, dtype=float)
    C = np.asarray(C, dtype=float)
    ok = np.isfinite(C) & (C > 0) & (T < T_c)
    if ok.sum() < 2:
        raise DivergentIntegralError("not enough finite points to fit an exponent", "two valid points")
    x = -np.log(T_c - T[ok])
    slope, _ = np.polyfit(x, np.log(C[ok]), 1)
    return float(slope)
