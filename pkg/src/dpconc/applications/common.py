from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from ..bounds import Mode, SensitivityProfile, TailBound, high_prob_bound, optimize_epsilon


@dataclass(frozen=True)
class ScenarioBound:
    """Best numeric bound found for one deviation level, plus the parameters that produced it."""

    t: float
    bound: TailBound
    lam: float
    profile: Optional[SensitivityProfile]

    @property
    def probability(self) -> float:
        return self.bound.effective


def best_bound_over_lambda(
    profile_for: Callable[[float], Optional[SensitivityProfile]],
    n: int,
    t: float,
    lam_grid: Iterable[float],
) -> ScenarioBound:
    """Minimise the valid high-probability bound at deviation t over lam and eps.

    ``profile_for(lam)`` returns None where a lam is outside the scenario's domain.
    A result with ``bound.valid`` False means no (lam, eps) pair on the grid
    gives a usable bound; its effective probability is then 1.
    """
    best: Optional[ScenarioBound] = None
    fallback: Optional[ScenarioBound] = None
    for lam in lam_grid:
        prof = profile_for(lam)
        if prof is None or prof.delta <= 0 or prof.tau <= 0:
            continue
        _, b = optimize_epsilon(prof, n, Mode.MIN_PROB_AT_THRESHOLD, t, high_prob_bound)
        cand = ScenarioBound(t, b, lam, prof)
        if b.valid and b.threshold <= t:
            if best is None or b.raw_probability < best.bound.raw_probability:
                best = cand
        elif fallback is None:
            fallback = cand
    if best is not None:
        return best
    if fallback is not None:
        return fallback
    return ScenarioBound(t, TailBound(t, 1.0, False, 0, math.nan, math.nan), math.nan, None)
