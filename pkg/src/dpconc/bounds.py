"""Closed-form tail bounds with explicit constants.

All logarithms are natural unless a name says otherwise.  Every probability
leaving this module is clamped to [0, 1]; the unclamped value is kept on the
result so callers can tell a vacuous bound from a tight one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np


class Source(str, Enum):
    DECLARED = "declared"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class SensitivityProfile:
    """Tail cutoff ``lam``, tail expectation ``delta`` and head expectation ``tau``."""

    lam: float
    delta: float
    tau: float
    source: Source = Source.DECLARED

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        if self.lam < 0 or self.delta < 0 or self.tau < 0:
            raise ValueError("lam, delta and tau must be nonnegative")
        if self.tau > self.lam:
            raise ValueError(f"tau={self.tau} exceeds lam={self.lam}")

    @classmethod
    def part_one(cls, lam: float, delta: float, source=Source.DECLARED) -> "SensitivityProfile":
        """Profile without a head bound (tau = lam)."""
        return cls(lam, delta, lam, source)


@dataclass(frozen=True)
class TailBound:
    threshold: float
    probability: float
    valid: bool
    required_n: int
    epsilon_used: float
    raw_probability: float = math.nan

    @property
    def clamped(self) -> bool:
        return self.raw_probability > 1.0

    @property
    def effective(self) -> float:
        """The probability a caller may rely on: the bound if valid, else the trivial 1."""
        return self.probability if self.valid else 1.0


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def _finite(*xs: float) -> bool:
    return all(math.isfinite(x) for x in xs)


def _required_n(condition: float) -> int:
    """Smallest integer n with n > condition."""
    if not math.isfinite(condition):
        return 0
    return max(1, math.floor(condition) + 1)


def spread(epsilon: float) -> float:
    """e^eps - e^-eps."""
    return 2.0 * math.sinh(epsilon)


def high_prob_bound(profile: SensitivityProfile, epsilon: float, n: int) -> TailBound:
    """Multi-sample amplification bound with explicit constants.

    Pr[|f(S) - f(D^n)| >= 6 s tau n] < 14 delta / (s tau),  s = e^eps - e^-eps,
    valid once n > 2 lam / (eps s tau) * ln(T + 1) with T = floor(s tau / (7 delta)).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if profile.delta == 0:
        raise ValueError("delta = 0: use mcdiarmid_bound")
    if profile.tau == 0:
        raise ValueError("tau = 0 makes the bound degenerate")
    s = spread(epsilon)
    tau, lam, delta = profile.tau, profile.lam, profile.delta
    threshold = 6.0 * s * tau * n
    raw = 14.0 * delta / (s * tau)
    T = math.floor(s * tau / (7.0 * delta)) if math.isfinite(s) else math.inf
    condition = 2.0 * lam / (epsilon * s * tau) * math.log(T + 1)
    ok = _finite(threshold, raw, condition)
    return TailBound(
        threshold=threshold,
        probability=_clamp(raw) if math.isfinite(raw) else 1.0,
        valid=bool(ok and n > condition),
        required_n=_required_n(condition),
        epsilon_used=epsilon,
        raw_probability=raw,
    )


def display_bound(profile: SensitivityProfile, epsilon: float, n: int) -> TailBound:
    """Headline form 18 eps tau n / (14 delta / (eps tau)); big-O sample condition, so never marked valid."""
    raw = 14.0 * profile.delta / (epsilon * profile.tau) if profile.tau > 0 else math.inf
    return TailBound(
        threshold=18.0 * epsilon * profile.tau * n,
        probability=_clamp(raw) if math.isfinite(raw) else 1.0,
        valid=False,
        required_n=0,
        epsilon_used=epsilon,
        raw_probability=raw,
    )


def mcdiarmid_bound(lam: float, n: int, epsilon: float, beta: float) -> TailBound:
    """Delta = 0 limit of :func:`high_prob_bound` with tau = lam and target probability beta.

    Setting 14 delta / (s lam) = beta gives T = floor(2 / beta), so the sample
    condition n > 2 / (eps s) * ln(T + 1) no longer depends on lam.
    """
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if lam <= 0 or epsilon <= 0:
        raise ValueError("lam and epsilon must be positive")
    s = spread(epsilon)
    T = math.floor(2.0 / beta)
    condition = 2.0 / (epsilon * s) * math.log(T + 1)
    threshold = 6.0 * s * lam * n
    return TailBound(
        threshold=threshold,
        probability=beta,
        valid=bool(_finite(threshold, condition) and n > condition),
        required_n=_required_n(condition),
        epsilon_used=epsilon,
        raw_probability=beta,
    )


def mcdiarmid_classical(t: float, n: int, lam: float) -> float:
    """Classical bounded-differences tail 2 exp(-2 t^2 / (n lam^2))."""
    return _clamp(2.0 * math.exp(-2.0 * t * t / (n * lam * lam)))


def sample_sum_bound(delta: float, epsilon: float, n: int) -> TailBound:
    """Pr[|sum S| >= 30 eps n] < delta / eps, valid when eps >= sqrt(ln(2/delta) / n)."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    floor_sq = math.log(2.0 / delta)
    raw = delta / epsilon
    return TailBound(
        threshold=30.0 * epsilon * n,
        probability=_clamp(raw),
        valid=bool(epsilon * epsilon * n >= floor_sq),
        required_n=max(1, math.ceil(floor_sq / (epsilon * epsilon))),
        epsilon_used=epsilon,
        raw_probability=raw,
    )


class Mode(str, Enum):
    MIN_PROB_AT_THRESHOLD = "min_prob_at_threshold"
    MIN_THRESHOLD_AT_PROB = "min_threshold_at_prob"


EPS_LO, EPS_HI = 1e-6, 10.0


def _bisect_log(pred: Callable[[float], bool], lo: float, hi: float, iters: int = 200) -> float:
    """Largest eps in [lo, hi] with pred true, assuming pred is true then false."""
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        m = 0.5 * (a + b)
        if pred(math.exp(m)):
            a = m
        else:
            b = m
        if b - a < 1e-15:
            break
    return math.exp(a)


def optimize_epsilon(
    profile: SensitivityProfile,
    n: int,
    mode: Mode | str,
    target: float,
    bound: Callable[[SensitivityProfile, float, int], TailBound] = high_prob_bound,
    grid_points: int = 241,
) -> tuple[float, TailBound]:
    """Choose eps in [1e-6, 10] for the best valid bound.

    ``min_prob_at_threshold``: smallest probability with threshold <= target.
    ``min_threshold_at_prob``: smallest threshold with probability <= target.
    The search combines a log-spaced scan, the analytic constraint boundary
    (found by bisection, both constraints are monotone in eps) and a
    golden-section refinement around the best scanned point.  When no
    feasible eps exists the best-effort bound is returned with valid=False.
    """
    mode = Mode(mode)

    if mode is Mode.MIN_PROB_AT_THRESHOLD:
        def meets(b: TailBound) -> bool:
            return b.threshold <= target

        def score(b: TailBound) -> float:
            return b.raw_probability
    else:
        def meets(b: TailBound) -> bool:
            return b.raw_probability <= target

        def score(b: TailBound) -> float:
            return b.threshold

    def objective(eps: float) -> tuple[float, TailBound]:
        b = bound(profile, eps, n)
        if b.valid and meets(b) and math.isfinite(score(b)):
            return score(b), b
        return math.inf, b

    candidates: list[float] = list(np.geomspace(EPS_LO, EPS_HI, grid_points))
    if mode is Mode.MIN_PROB_AT_THRESHOLD:
        if meets(bound(profile, EPS_LO, n)):
            candidates.append(_bisect_log(lambda e: meets(bound(profile, e, n)), EPS_LO, EPS_HI))
    else:
        if meets(bound(profile, EPS_HI, n)):
            candidates.append(_bisect_log(lambda e: not meets(bound(profile, e, n)), EPS_LO, EPS_HI) * (1 + 1e-9))
            candidates[-1] = min(candidates[-1], EPS_HI)

    evaluated = [(eps,) + objective(eps) for eps in candidates]
    best_eps, best_val, best_bound = min(evaluated, key=lambda r: (r[1], r[0]))

    if math.isfinite(best_val):
        grid = candidates[:grid_points]
        j = int(np.searchsorted(grid, best_eps))
        lo = math.log(grid[max(j - 1, 0)])
        hi = math.log(grid[min(j + 1, grid_points - 1)])
        invphi = (math.sqrt(5) - 1) / 2
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        fc, bc = objective(math.exp(c))
        fd, bd = objective(math.exp(d))
        for x, fx, bx in ((c, fc, bc), (d, fd, bd)):
            if fx < best_val:
                best_eps, best_val, best_bound = math.exp(x), fx, bx
        for _ in range(80):
            if fc <= fd:
                hi, d, fd, bd = d, c, fc, bc
                c = hi - invphi * (hi - lo)
                fc, bc = objective(math.exp(c))
                x, fx, bx = c, fc, bc
            else:
                lo, c, fc, bc = c, d, fd, bd
                d = lo + invphi * (hi - lo)
                fd, bd = objective(math.exp(d))
                x, fx, bx = d, fd, bd
            if fx < best_val:
                best_eps, best_val, best_bound = math.exp(x), fx, bx
            if hi - lo < 1e-12:
                break
        return best_eps, best_bound

    # no feasible eps: best effort, preferring bounds that at least meet the target
    def fallback_key(r):
        eps, _, b = r
        return (not meets(b), score(b) if meets(b) else abs(math.log(max(b.threshold, 1e-300) / max(target, 1e-300))))

    eps, _, b = min(evaluated, key=fallback_key)
    return eps, replace(b, valid=False)


def hoeffding_tail(n: int, dev: float) -> float:
    """2 exp(-2 dev^2 / n) for a sum of n variables in [0, 1]."""
    if dev < 0:
        raise ValueError("dev must be nonnegative")
    return _clamp(2.0 * math.exp(-2.0 * dev * dev / n))


def chernoff_multiplicative(n: int, p: float, delta: float, side: str = "upper") -> float:
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if side == "upper":
        if not 0 < delta <= 1:
            raise ValueError(f"upper side needs 0 < delta <= 1, got {delta}")
        return _clamp(math.exp(-p * n * delta * delta / 3.0))
    if side == "lower":
        if not 0 < delta < 1:
            raise ValueError(f"lower side needs 0 < delta < 1, got {delta}")
        return _clamp(math.exp(-p * n * delta * delta / 2.0))
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


class FloorResult(NamedTuple):
    value: float
    valid: bool


def chernoff_tightness_floor(n: int, p: float, delta: float) -> FloorResult:
    """Lower bound exp(-9 delta^2 p n) on either multiplicative tail.

    Requires 0 < p, delta <= 1/2 and n >= 3 / (delta^2 p); otherwise flagged invalid.
    """
    value = math.exp(-9.0 * delta * delta * p * n)
    ok = 0 < p <= 0.5 and 0 < delta <= 0.5 and n >= 3.0 / (delta * delta * p)
    return FloorResult(value, ok)


def relative_entropy(a: float, p: float) -> float:
    """KL divergence D(Bernoulli(a) || Bernoulli(p)) in nats."""
    if not (0 <= a <= 1 and 0 <= p <= 1):
        raise ValueError("arguments must be probabilities")
    if a == p:
        return 0.0
    total = 0.0
    if a > 0:
        if p == 0:
            return math.inf
        total += a * math.log(a / p)
    if a < 1:
        if p == 1:
            return math.inf
        total += (1 - a) * (math.log1p(-a) - math.log1p(-p))
    return max(total, 0.0)


def binomial_tail_entropy_bound(n: int, p: float, k: float) -> float:
    """exp(-n D(k/n || p)), an upper bound on Pr[Binomial(n, p) >= k] for p < k/n < 1.

    The classical statement is sometimes printed with the inequality reversed;
    the direction used here is the upper bound, which is the one that holds.
    """
    a = k / n
    if not p < a < 1:
        raise ValueError(f"need p < k/n < 1, got k/n={a}, p={p}")
    return math.exp(-n * relative_entropy(a, p))


class EntropyFloorCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool
    condition_met: bool
    rhs_natural: float
    holds_natural: bool


def relative_entropy_floor_check(b: float, c: float, N: float) -> EntropyFloorCheck:
    """Compare D(N^-b || N^-c) with ((c - b) / 2) N^-b log2(N).

    The floor is guaranteed once N >= max(2^(1/b), 2^(8/(c-b))); the variant
    with a natural logarithm is evaluated as well.
    """
    if not c > b > 0:
        raise ValueError("need c > b > 0")
    lhs = relative_entropy(N ** -b, N ** -c)
    rhs = (c - b) / 2.0 * N ** -b * math.log2(N)
    rhs_nat = (c - b) / 2.0 * N ** -b * math.log(N)
    cond = N >= max(2.0 ** (1.0 / b), 2.0 ** (8.0 / (c - b)))
    return EntropyFloorCheck(lhs, rhs, lhs >= rhs, cond, rhs_nat, lhs >= rhs_nat)


def max_info_floor(beta: float) -> float:
    """ln(1 / (4 beta)); 0 when beta > 1/4."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if beta > 0.25:
        return 0.0
    return max(0.0, math.log(1.0 / (4.0 * beta)))


def markov_tail(lam: float, tail_expectation: float) -> float:
    if lam <= 0:
        raise ValueError("lam must be positive")
    return _clamp(tail_expectation / lam)
