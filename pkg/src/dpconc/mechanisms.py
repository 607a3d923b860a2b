"""Exponential mechanism, the multi-sample selectors and exact verifiers.

Every mechanism here has a closed-form output distribution, so the privacy
and utility verifiers work on exact probabilities.  Sampling is only used by
end-to-end experiments.  An abstain outcome is represented by ``None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np

from .core import FunctionUnderTest, MultiSample, RngStream, Sample


@dataclass(frozen=True)
class QualityFunction:
    candidates: tuple
    score: Callable[[Any, Any], float]
    sensitivity: float

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValueError("candidate set must be nonempty")
        if self.sensitivity < 0:
            raise ValueError("sensitivity must be nonnegative")

    def scores(self, data) -> np.ndarray:
        return np.array([self.score(data, h) for h in self.candidates], dtype=float)

    def respects_sensitivity(self, data, other, tol: float = 1e-12) -> bool:
        gap = np.abs(self.scores(data) - self.scores(other))
        return bool(np.all(gap <= self.sensitivity * (1 + tol) + tol))


def log_weights_to_probs(logw: np.ndarray) -> np.ndarray:
    logw = np.asarray(logw, dtype=float)
    if not np.all(np.isfinite(logw)):
        raise ValueError("scores must be finite")
    w = np.exp(logw - logw.max())
    return w / math.fsum(w)


def em_probs(scores, epsilon: float, sensitivity: float) -> np.ndarray:
    """p_i proportional to exp(eps * score_i / (2 * sensitivity))."""
    if epsilon <= 0 or sensitivity <= 0:
        raise ValueError("epsilon and sensitivity must be positive")
    return log_weights_to_probs(np.asarray(scores, dtype=float) * (epsilon / (2.0 * sensitivity)))


def em_output_distribution(q: QualityFunction, data, epsilon: float) -> np.ndarray:
    return em_probs(q.scores(data), epsilon, q.sensitivity)


def draw_index(probs: np.ndarray, rng: RngStream) -> int:
    """Inverse-CDF draw of an index from a probability vector."""
    cdf = np.cumsum(probs)
    u = rng.uniform() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def exponential_mechanism(q: QualityFunction, data, epsilon: float, rng: RngStream):
    return q.candidates[draw_index(em_output_distribution(q, data, epsilon), rng)]


def em_failure_mass(scores, epsilon: float, sensitivity: float, gap: float) -> tuple[float, float]:
    """Exact Pr[q <= Opt - gap] under the mechanism, and the |H| exp(-eps gap / (2 sens)) bound."""
    scores = np.asarray(scores, dtype=float)
    p = em_probs(scores, epsilon, sensitivity)
    mass = math.fsum(p[scores <= scores.max() - gap])
    return mass, len(scores) * math.exp(-epsilon * gap / (2.0 * sensitivity))


class QualityFloor(NamedTuple):
    expected_quality: float
    floor: float
    holds: bool


def em_expected_quality_floor(scores, eta, data=None) -> QualityFloor:
    """E[h(Y)] for Pr[Y = y] proportional to exp(eta h(y)), against max h - ln|H| / eta.

    ``scores`` is the vector h; a QualityFunction may be passed instead, with
    the call ``em_expected_quality_floor(q, eta, data)``.
    """
    if isinstance(scores, QualityFunction):
        scores = scores.scores(data)
    if eta <= 0:
        raise ValueError("eta must be positive")
    h = np.asarray(scores, dtype=float)
    p = log_weights_to_probs(eta * h)
    expected = math.fsum(p * h)
    floor = h.max() - math.log(len(h)) / eta
    return QualityFloor(expected, floor, expected >= floor - 1e-9)


# multi-sample selectors ---------------------------------------------------------


def algorithm_b_outcomes(T: int) -> list:
    return [None] + list(range(T))


def algorithm_b_distribution(ms: MultiSample, f: FunctionUnderTest, mean_reference: float,
                             lam: float, epsilon: float) -> np.ndarray:
    """Exact output law over (None, 0, ..., T-1) with qualities (0, f(S_t) - mean_reference)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    scores = np.concatenate([[0.0], ms.values(f) - mean_reference])
    return em_probs(scores, epsilon, lam)


def algorithm_b_selector(ms: MultiSample, f: FunctionUnderTest, mean_reference: float,
                         lam: float, epsilon: float, rng: RngStream) -> Optional[int]:
    k = draw_index(algorithm_b_distribution(ms, f, mean_reference, lam, epsilon), rng)
    return None if k == 0 else k - 1


def simplified_b_distribution(ms: MultiSample, f: FunctionUnderTest, epsilon: float) -> np.ndarray:
    """Exact output law over (0, ..., T-1), probabilities proportional to exp(eps f(S_t) / 2)."""
    return em_probs(ms.values(f), epsilon, 1.0)


def simplified_b_selector(ms: MultiSample, f: FunctionUnderTest, epsilon: float, rng: RngStream) -> int:
    return draw_index(simplified_b_distribution(ms, f, epsilon), rng)


def simplified_b_T(epsilon: float, delta: float) -> int:
    return math.floor(2.0 * epsilon / delta)


def algorithm_b_T(epsilon: float, tau: float, delta: float) -> int:
    return math.floor(2.0 * math.sinh(epsilon) * tau / (7.0 * delta))


# verifiers ------------------------------------------------------------------------


def max_log_ratio(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, float), np.asarray(q, float)
    if p.shape != q.shape:
        raise ValueError("distributions over different outcome sets")
    both_zero = (p == 0) & (q == 0)
    if np.any((p == 0) != (q == 0)):
        return math.inf
    r = np.abs(np.log(p[~both_zero]) - np.log(q[~both_zero]))
    return float(r.max()) if r.size else 0.0


def verify_flambda_privacy(distribution: Callable[[MultiSample], np.ndarray], ms: MultiSample,
                           ms_other: MultiSample, f: FunctionUnderTest, lam: float) -> float:
    """Largest |log(p/p')| over outcomes for an (f, lam)-neighboring pair."""
    if not ms.is_f_lambda_neighbor(ms_other, f, lam):
        raise ValueError("pair is not (f, lam)-neighboring")
    return max_log_ratio(distribution(ms), distribution(ms_other))


class TransferCheck(NamedTuple):
    lhs: float
    rhs_full: float
    rhs_short: float
    holds_full: bool
    holds_short: Optional[bool]


def check_dp_expectation_transfer(distribution: Callable[[MultiSample], np.ndarray], ms: MultiSample,
                                  ms_other: MultiSample, f: FunctionUnderTest, lam: float,
                                  epsilon: float, h) -> TransferCheck:
    """Exact check of E_M(S)[h] <= e^-eps E_M(S')[h] + (e^eps - e^-eps) E_M(S')[|h|].

    The shorter form E_M(S')[h] + 4 eps E_M(S')[|h|] is reported for eps <= 1
    and only judged when E_M(S')[h] >= 0; for negative E_M(S')[h] it does not
    follow from the first inequality, so ``holds_short`` is None there.
    """
    if not ms.is_f_lambda_neighbor(ms_other, f, lam):
        raise ValueError("pair is not (f, lam)-neighboring")
    return transfer_check(distribution(ms), distribution(ms_other), h, epsilon)


def transfer_check(p: np.ndarray, p_other: np.ndarray, h, epsilon: float) -> TransferCheck:
    """The same comparison for two explicit output distributions on one outcome set."""
    h = np.asarray(h, dtype=float)
    p, p2 = np.asarray(p, float), np.asarray(p_other, float)
    lhs = math.fsum(p * h)
    e_h = math.fsum(p2 * h)
    e_abs = math.fsum(p2 * np.abs(h))
    rhs_full = math.exp(-epsilon) * e_h + 2.0 * math.sinh(epsilon) * e_abs
    rhs_short = e_h + 4.0 * epsilon * e_abs
    tol = 1e-12 * max(1.0, e_abs)
    holds_short = (lhs <= rhs_short + tol) if (epsilon <= 1 and e_h >= 0) else None
    return TransferCheck(lhs, rhs_full, rhs_short, lhs <= rhs_full + tol, holds_short)


def generate_neighbors(ms: MultiSample, f: FunctionUnderTest, lam: float, rng: RngStream,
                       draw: Optional[Callable[[RngStream], Any]] = None, budget: int = 1000) -> MultiSample:
    """A random (f, lam)-neighbor of ``ms`` built from single-coordinate replacements.

    Each subsample receives a random number of proposed replacements; a
    proposal is kept only if the subsample's f-value stays within ``lam`` of
    the original.  Replacement values come from ``draw`` when given, otherwise
    from the pool of elements already present in ``ms``.  The result is
    re-checked against the neighbor predicate before it is returned.
    """
    pool = np.concatenate([s.elements.reshape(s.n, -1) for s in ms.subsamples])
    shape = ms[0].elements.shape[1:]
    n = ms.n
    proposals = 0
    subs = []
    for t, s in enumerate(ms.subsamples):
        base = f(s)
        cur = s
        steps = 1 + rng.integers(n)
        for _ in range(steps):
            if proposals >= budget:
                break
            proposals += 1
            i = rng.integers(n)
            z = draw(rng) if draw is not None else pool[rng.integers(len(pool))].reshape(shape)
            cand = cur.replace(i, z)
            if abs(f(cand) - base) <= lam:
                cur = cand
        subs.append(cur)
    out = MultiSample(tuple(subs))
    if not ms.is_f_lambda_neighbor(out, f, lam):
        raise RuntimeError("generated multi-sample failed the neighbor predicate")
    return out


def worst_case_neighbor_values(values: np.ndarray, lam: float, up: Sequence[bool]) -> np.ndarray:
    """Shift each f-value by +lam or -lam, the extreme allowed by the neighbor relation."""
    return np.asarray(values, float) + np.where(np.asarray(up), lam, -lam)
