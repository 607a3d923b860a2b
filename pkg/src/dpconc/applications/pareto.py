"""Sample sums of heavy-tailed symmetric Pareto variables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ..bounds import SensitivityProfile
from .common import ScenarioBound, best_bound_over_lambda


class Variant(str, Enum):
    # assumes Pr[rho >= t] <= 1/t^2 for the replacement distance
    ABSTRACT = "abstract"
    # SymmetricPareto(min=1, exponent=2): Pr[|y - z| >= t] <= 8/t^2 and E|y - z| <= 4
    INSTANTIATED = "instantiated"


LAMBDA_GRID = tuple(np.geomspace(2.0, 1e12, 150))


@dataclass(frozen=True)
class ParetoSensitivity(SensitivityProfile):
    """Profile tagged with its variant; ``tau_formula`` is the uncapped head constant."""

    variant: Variant = Variant.INSTANTIATED
    tau_formula: float = math.nan


def pareto_constants(lam: float, variant: Variant | str = Variant.INSTANTIATED) -> tuple[float, float]:
    """(delta, tau) as given by the tail integrals, before capping tau at lam."""
    variant = Variant(variant)
    if variant is Variant.ABSTRACT:
        if lam < 1:
            raise ValueError("abstract variant needs lam >= 1")
        return 2.0 / lam, 2.0
    if lam < 2:
        raise ValueError("instantiated variant needs lam >= 2")
    return 16.0 / lam, 4.0


def pareto_profile(lam: float, variant: Variant | str = Variant.INSTANTIATED) -> ParetoSensitivity:
    """Profile with tau = min(tau_formula, lam); the head expectation never exceeds lam."""
    variant = Variant(variant)
    delta, tau = pareto_constants(lam, variant)
    return ParetoSensitivity(lam, delta, min(tau, lam), variant=variant, tau_formula=tau)


def display_forms(n: int, t: float) -> tuple[float, float]:
    """(n^1.5 / t^2, n^2 / t^3 for t <= n else n / t^2), constants set to 1, clamped."""
    first = n ** 1.5 / t ** 2
    second = n * n / t ** 3 if t <= n else n / t ** 2
    return min(1.0, first), min(1.0, second)


def pareto_tail_bound(n: int, t: float, variant: Variant | str = Variant.INSTANTIATED,
                      lam_grid: Sequence[float] = LAMBDA_GRID) -> ScenarioBound:
    if t <= 0:
        raise ValueError("t must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    variant = Variant(variant)
    floor = 1.0 if variant is Variant.ABSTRACT else 2.0
    return best_bound_over_lambda(lambda lam: pareto_profile(lam, variant) if lam >= floor else None,
                                  n, t, lam_grid)


def log_log_slope(ts: Sequence[float], probs: Sequence[float]) -> float:
    """Least-squares slope of log(prob) against log(t) over points with 0 < prob < 1."""
    ts, probs = np.asarray(ts, float), np.asarray(probs, float)
    keep = (probs > 0) & (probs < 1)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ts[keep]), np.log(probs[keep]), 1)[0])


def pareto_bound_slope(n: int, ts: Sequence[float], variant: Variant | str = Variant.INSTANTIATED) -> float:
    return log_log_slope(ts, [pareto_tail_bound(n, t, variant).probability for t in ts])
