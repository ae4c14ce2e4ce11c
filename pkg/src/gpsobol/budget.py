"""Simulator-budget planning against Monte-Carlo sample size.

The estimator error has two parts: Monte-Carlo noise shrinking like 1/m and
surrogate error shrinking with the budget T. The critical budget makes
``m * B^2_T ~ 1`` so neither side dominates; growing T much past it buys
nothing (the Monte-Carlo error floors the total), while undershooting it
biases the estimator and invalidates the confidence intervals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "MaternRegime",
    "GaussianRegime",
    "GaussianMeasureRegime",
    "Regime",
    "BudgetPlan",
    "critical_budget",
    "extrapolate_imse",
    "plan_budget_from_pilot",
    "solve_budget_for_imse",
    "regime_classify",
]

BALANCED_BAND = (0.1, 10.0)  # symmetric decade around the critical point m B^2 = 1


@dataclass(frozen=True)
class MaternRegime:
    """Tensorised Matern-nu kernel in dimension d."""

    nu: float
    d: int

    def __post_init__(self):
        if self.nu <= 0.5:
            raise ValueError("Matern regime requires nu > 1/2")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")


@dataclass(frozen=True)
class GaussianRegime:
    """Gaussian kernel in dimension d (Lebesgue-type eigenvalue bound)."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")


@dataclass(frozen=True)
class GaussianMeasureRegime:
    """Gaussian kernel under a Gaussian design measure with decay rate xi_d."""

    xi_d: float

    def __post_init__(self):
        if self.xi_d <= 0.0:
            raise ValueError("xi_d must be strictly positive")


class Regime(Enum):
    BALANCED = "balanced"
    MONTE_CARLO_DOMINATED = "monte_carlo_dominated"
    SURROGATE_DOMINATED = "surrogate_dominated"


@dataclass(frozen=True)
class BudgetPlan:
    m: int
    total_budget: float
    kernel_regime: str
    noise_variance: float
    regime: Regime
    m_bt2: float | None = None

    def to_json(self) -> str:
        payload = {
            "m": self.m,
            "T": self.total_budget,
            "kernel_regime": self.kernel_regime,
            "sigma_eps2": self.noise_variance,
            "regime": self.regime.value,
            "m_bt2": self.m_bt2,
        }
        return json.dumps(payload)


def critical_budget(
    regime, m: int, noise_variance: float, drop_matern_noise_factor: bool = False
) -> float:
    """Budget T at the critical point ``m B^2_T ~ 1`` for the given kernel regime.

    Matern: ``T / s2 = s2 * m^(1/(1 - 1/(2(nu+1/2)))) * log(m)^(d-1)``;
    the extra leading ``s2`` looks like a typo in the source relation, and
    ``drop_matern_noise_factor`` removes it.
    Gaussian (Lebesgue bound): ``T / s2 = m * log(m)^d``.
    Gaussian measure: ``T / s2 = xi_d * m * log(m)``.
    """
    if m <= 1:
        raise ValueError("critical budgets require m >= 2 (log m must be positive)")
    if noise_variance <= 0.0:
        raise ValueError("noise_variance must be strictly positive")
    logm = math.log(m)
    if isinstance(regime, MaternRegime):
        exponent = 1.0 / (1.0 - 1.0 / (2.0 * (regime.nu + 0.5)))
        ratio = m**exponent * logm ** (regime.d - 1)
        if not drop_matern_noise_factor:
            ratio *= noise_variance
        return noise_variance * ratio
    if isinstance(regime, GaussianRegime):
        return noise_variance * m * logm**regime.d
    if isinstance(regime, GaussianMeasureRegime):
        return noise_variance * regime.xi_d * m * logm
    raise TypeError(f"unknown kernel regime {regime!r}")


def extrapolate_imse(imse0: float, T0: float, noise_variance: float, T: float) -> float:
    """Extend a pilot IMSE along the ``log(T/s2) / T`` decay law.

    ``IMSE_T = IMSE_T0 * (T0 log(T/s2)) / (T log(T0/s2))``; exact at T = T0.
    """
    if min(imse0, T0, noise_variance, T) <= 0.0:
        raise ValueError("all arguments must be strictly positive")
    if T / noise_variance <= 1.0 or T0 / noise_variance <= 1.0:
        raise ValueError("T/sigma_eps2 must exceed 1 for the decay law to apply")
    return imse0 * (T0 * math.log(T / noise_variance)) / (T * math.log(T0 / noise_variance))


def _pilot_constant(imse0: float, T0: float, noise_variance: float) -> float:
    return math.log(T0 / noise_variance) / (T0 * imse0)


def plan_budget_from_pilot(imse0: float, T0: float, noise_variance: float, m: int) -> float:
    """First-order budget at which the extrapolated IMSE reaches 1/m.

    ``T = (m/C) log(m/(C s2))`` with ``C = log(T0/s2) / (T0 IMSE_T0)``. This
    approximates log(T/s2) by log(m/(C s2)) inside the log, which undershoots
    the exact crossing by a factor ``1 + log(L)/L`` with ``L = log(m/(C s2))``;
    see :func:`solve_budget_for_imse` for the exact inversion.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if min(imse0, T0, noise_variance) <= 0.0:
        raise ValueError("pilot quantities must be strictly positive")
    C = _pilot_constant(imse0, T0, noise_variance)
    arg = m / (C * noise_variance)
    if arg <= 1.0:
        raise ValueError("m/(C sigma_eps2) must exceed 1")
    return (m / C) * math.log(arg)


def solve_budget_for_imse(
    imse0: float, T0: float, noise_variance: float, target: float, tol: float = 1e-12
) -> float:
    """Exact budget at which the extrapolated IMSE equals ``target``.

    Fixed-point iteration on ``T = (1/(C target)) log(T/s2)``; converges in a
    handful of steps from the first-order seed.
    """
    if target <= 0.0:
        raise ValueError("target IMSE must be strictly positive")
    C = _pilot_constant(imse0, T0, noise_variance)
    T = math.log(1.0 / (C * target * noise_variance)) / (C * target)
    for _ in range(200):
        T_next = math.log(T / noise_variance) / (C * target)
        if abs(T_next - T) <= tol * T:
            return T_next
        T = T_next
    return T


def regime_classify(m: int, bt2: float) -> Regime:
    """Classify the error balance from the product ``m * B^2_T``.

    The band [0.1, 10] around the critical point is policy, not theory; the
    asymptotic statement is a dichotomy (product tending to 0 or infinity).
    At products above the band the estimator is biased and the confidence
    intervals are invalid.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if bt2 < 0.0:
        raise ValueError("bt2 must be nonnegative")
    product = m * bt2
    lo, hi = BALANCED_BAND
    if product < lo:
        return Regime.MONTE_CARLO_DOMINATED
    if product > hi:
        return Regime.SURROGATE_DOMINATED
    return Regime.BALANCED
