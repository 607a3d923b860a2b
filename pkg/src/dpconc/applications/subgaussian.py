"""Functions whose replacement differences have a subgaussian symmetrized distance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..bounds import SensitivityProfile
from ..core import DomainDistribution, RngStream
from .common import ScenarioBound, best_bound_over_lambda

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]

# lam is searched as a multiple of sigma so the optimum is scale-equivariant
LAMBDA_MULTIPLES = tuple(np.geomspace(0.25, 400.0, 90))


def absolute_difference(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(x, float) - np.asarray(y, float))


@dataclass(frozen=True)
class SubgaussianScenario:
    sigma: float
    rho: Metric = absolute_difference

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def subgaussian_delta(lam: float, sigma: float) -> float:
    """3 (lam + sigma) exp(-lam^2 / (2 sigma^2)), the tail expectation above lam."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 3.0 * (lam + sigma) * math.exp(-lam * lam / (2.0 * sigma * sigma))


def subgaussian_head(lam: float, sigma: float) -> float:
    """Head expectation bound min(lam, E rho) with E rho <= integral of 2 exp(-u^2/(2 sigma^2)) = sqrt(2 pi) sigma."""
    return min(lam, math.sqrt(2.0 * math.pi) * sigma)


def subgaussian_profile(lam: float, sigma: float) -> SensitivityProfile:
    return SensitivityProfile(lam, subgaussian_delta(lam, sigma), subgaussian_head(lam, sigma))


def kontorovich_reference(sigma: float, n: int, t: float) -> float:
    """2 exp(-t^2 / (2 n sigma^2))."""
    return min(1.0, 2.0 * math.exp(-t * t / (2.0 * n * sigma * sigma)))


def display_form(sigma: float, n: int, t: float) -> float:
    """exp(-t / (sqrt(n) sigma)) up to t = sigma n^1.5, exp(-(t / sigma)^(2/3)) beyond; constants set to 1."""
    if t <= sigma * n ** 1.5:
        return math.exp(-t / (math.sqrt(n) * sigma))
    return math.exp(-((t / sigma) ** (2.0 / 3.0)))


def subgaussian_tail_bound(sigma: float, n: int, t: float,
                           lam_multiples: Sequence[float] = LAMBDA_MULTIPLES) -> ScenarioBound:
    if t <= 0:
        raise ValueError("t must be positive")
    return best_bound_over_lambda(lambda lam: subgaussian_profile(lam, sigma), n, t,
                                  (m * sigma for m in lam_multiples))


@dataclass(frozen=True)
class DiameterEstimate:
    sigma: float
    std_error: float
    argmax_lambda: float
    per_lambda: dict = field(default_factory=dict)
    dropped: tuple = ()
    heuristic: bool = True


def estimate_subgaussian_diameter(dist: DomainDistribution, rho: Metric, trials: int,
                                  lambda_grid: Iterable[float], rng: RngStream) -> DiameterEstimate:
    """Grid estimate of the smallest sigma with E[exp(l Xi)] <= exp(sigma^2 l^2 / 2).

    Xi = xi * rho(x, x') with x, x' independent draws and xi a fair sign.
    Returns max over the grid of sqrt(2 ln M(l) / l^2) with a delta-method
    standard error at the maximising l.  Since Xi is symmetric the MGF is
    estimated by the mean of cosh(l Xi), which is unbiased, has lower variance
    and makes the result independent of the sign convention.  Grid points
    whose sampled MGF is not finite are dropped and listed.
    """
    grid = [float(l) for l in lambda_grid]
    if any(l == 0 for l in grid):
        raise ValueError("lambda grid must exclude 0")
    x = dist.draw(rng.split(0), trials)
    y = dist.draw(rng.split(1), trials)
    sign = np.where(rng.split(2).uniform(trials) < 0.5, -1.0, 1.0)
    xi = sign * np.asarray(rho(x, y), dtype=float)
    per, dropped = {}, []
    best = (0.0, 0.0, math.nan)
    for lam in grid:
        with np.errstate(over="ignore"):
            w = np.cosh(lam * xi)
        m = math.fsum(w) / trials
        if not math.isfinite(m) or not np.all(np.isfinite(w)):
            dropped.append(lam)
            continue
        se_m = float(np.std(w, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        s2 = 2.0 * math.log(m) / (lam * lam) if m > 0 else 0.0
        s = math.sqrt(max(s2, 0.0))
        se = se_m / (s * lam * lam * m) if s > 0 else 0.0
        per[lam] = (s, se)
        if s > best[0] or math.isnan(best[2]):
            best = (s, se, lam)
    return DiameterEstimate(best[0], best[1], best[2], per, tuple(dropped))
