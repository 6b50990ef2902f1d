"""Model specification: money function, integration domain, constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping

from .expr import MoneyExpr, constants_of, parse_money_fn, to_text, variables_of

if TYPE_CHECKING:
    from .catalog import FamilyParams

__all__ = ["Interval", "MacroParam", "ModelSpec", "ThermoState"]


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        if not lo < hi:
            raise ValueError(f"interval needs lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)


@dataclass(frozen=True)
class MacroParam:
    """A domain bound promoted to a macroscopic parameter.

    ``bound`` is ``"lower"`` or ``"upper"`` of variable ``var`` (1-based).
    Its conjugate intensive variable is ``y = -df/d(bound)``.
    """

    name: str
    var: int
    bound: str

    def __post_init__(self):
        if self.bound not in ("lower", "upper"):
            raise ValueError(f"bound must be 'lower' or 'upper', got {self.bound!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to build the partition-function integral.

    ``measure_factor`` multiplies Q and stands for the product of the
    domain measures of spectator variables that are not integrated
    explicitly.  ``family`` is set for catalog models and drives the family
    validity checks.
    """

    expression: MoneyExpr
    n_vars: int
    domain: tuple[Interval, ...]
    constants: Mapping[str, float] = field(default_factory=dict)
    measure_factor: float = 1.0
    macro_params: tuple[MacroParam, ...] = ()
    family: "FamilyParams | None" = None

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "constants", dict(self.constants))
        object.__setattr__(self, "macro_params", tuple(self.macro_params))
        problems = []
        if self.n_vars < 1:
            problems.append(f"n_vars must be >= 1, got {self.n_vars}")
        if len(self.domain) != self.n_vars:
            problems.append(f"domain has {len(self.domain)} intervals for {self.n_vars} variables")
        if not (self.measure_factor > 0 and math.isfinite(self.measure_factor)):
            problems.append(f"measure_factor must be a positive finite number, got {self.measure_factor}")
        used = variables_of(self.expression)
        if used and max(used) > self.n_vars:
            problems.append(f"expression references l{max(used)} but n_vars = {self.n_vars}")
        missing = sorted(constants_of(self.expression) - set(self.constants))
        if missing:
            problems.append(f"constants missing from the constant map: {', '.join(missing)}")
        for mp in self.macro_params:
            if not 1 <= mp.var <= self.n_vars:
                problems.append(f"macro parameter {mp.name!r} refers to l{mp.var} (n_vars = {self.n_vars})")
            elif not math.isfinite(self.bound_value(mp)):
                problems.append(f"macro parameter {mp.name!r} must be a finite domain bound")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def from_text(cls, text: str, domain, constants: Mapping[str, float] | None = None, **kwargs) -> "ModelSpec":
        constants = dict(constants or {})
        domain = tuple(d if isinstance(d, Interval) else Interval(*d) for d in domain)
        expr = parse_money_fn(text, len(domain), constants)
        return cls(expr, len(domain), domain, constants, **kwargs)

    @property
    def text(self) -> str:
        return to_text(self.expression)

    def bound_value(self, mp: MacroParam) -> float:
        iv = self.domain[mp.var - 1]
        return iv.lower if mp.bound == "lower" else iv.upper

    def macro(self, name: str) -> MacroParam:
        for mp in self.macro_params:
            if mp.name == name:
                return mp
        raise KeyError(f"no macro parameter named {name!r}")

    def with_macro(self, name: str, value: float) -> "ModelSpec":
        """Copy of the model with macro parameter ``name`` moved to ``value``."""
        mp = self.macro(name)
        domain = list(self.domain)
        iv = domain[mp.var - 1]
        domain[mp.var - 1] = (
            Interval(value, iv.upper) if mp.bound == "lower" else Interval(iv.lower, value)
        )
        family = self.family
        if family is not None:
            family = family.with_macro(name, value)
        return replace(self, domain=tuple(domain), family=family)


@dataclass
class ThermoState:
    """Thermodynamic variables at one temperature.

    ``y`` maps macro-parameter names to their conjugate intensive variables;
    ``residuals`` holds consistency-check magnitudes (e.g. ``"legendre"``);
    ``flags`` marks states computed under special conditions such as
    ``"continued"`` (analytic continuation of a closed form).
    """

    T: float
    Q: float
    f: float
    S: float
    mean_m: float
    C: float
    y: dict[str, float] = field(default_factory=dict)
    residuals: dict[str, float] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    @property
    def legendre_residual(self) -> float:
        return abs(self.f - (self.mean_m - self.T * self.S))
