"""Monte Carlo estimators for the quantities the bounds consume.

Trials are grouped into fixed-size blocks; block ``b`` draws from
``rng.split(b)``.  The block layout depends only on the trial count, so
results are identical whatever the worker count, and per-trial values are
reduced serially in trial order with exactly rounded summation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import DomainDistribution, FunctionUnderTest, MultiSample, RngStream, Sample

BLOCK_SIZE = 1024
Z95 = 1.96

_threads = 1


def set_threads(k: Optional[int]) -> None:
    """Cap on worker threads used for trial blocks (None: all cores)."""
    global _threads
    import os

    _threads = max(1, k if k else (os.cpu_count() or 1))


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    trials: int
    ci95_low: float
    ci95_high: float
    note: str = ""

    @classmethod
    def from_values(cls, values, note: str = "") -> "MonteCarloEstimate":
        v = np.asarray(values, dtype=float).ravel()
        k = v.size
        if k == 0:
            raise ValueError("no trials")
        mean = math.fsum(v) / k
        if k > 1:
            var = math.fsum((v - mean) ** 2) / (k - 1)
            se = math.sqrt(var / k)
        else:
            se = 0.0
        return cls(mean, se, k, mean - Z95 * se, mean + Z95 * se, note)

    @classmethod
    def exact(cls, value: float, trials: int, note: str = "") -> "MonteCarloEstimate":
        return cls(float(value), 0.0, trials, float(value), float(value), note)

    def upper(self, k: float = 3.0) -> float:
        return self.mean + k * self.std_error

    def lower(self, k: float = 3.0) -> float:
        return self.mean - k * self.std_error


def run_blocks(
    rng: RngStream,
    trials: int,
    block_fn: Callable[[RngStream, int, int], np.ndarray],
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Call ``block_fn(stream, start, count)`` per block and concatenate in trial order."""
    if trials < 1:
        raise ValueError("trials must be positive")
    starts = list(range(0, trials, block_size))
    jobs = [(rng.split(b), s, min(block_size, trials - s)) for b, s in enumerate(starts)]
    if _threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=_threads) as pool:
            parts = list(pool.map(lambda j: np.asarray(block_fn(*j)), jobs))
    else:
        parts = [np.asarray(block_fn(*j)) for j in jobs]
    return np.concatenate(parts)


def _values(f: FunctionUnderTest, block: np.ndarray) -> np.ndarray:
    if f.batch_evaluate is not None:
        return np.asarray(f.batch_evaluate(block), dtype=float)
    return np.array([f(Sample(row)) for row in block], dtype=float)


@dataclass(frozen=True)
class DeltaEstimate:
    summary: MonteCarloEstimate
    per_index: dict = field(default_factory=dict)
    pooled: bool = False


def _tail_term(d: np.ndarray, lam: float) -> np.ndarray:
    d = np.abs(d)
    return np.where(d > lam, d, 0.0)


def estimate_delta(
    f: FunctionUnderTest,
    dist: DomainDistribution,
    lam: float,
    n: int,
    trials: int,
    rng: RngStream,
    indices: Optional[Iterable[int]] = None,
) -> DeltaEstimate:
    """Estimate E[1{|f(S) - f(S^(i<-z))| > lam} |f(S) - f(S^(i<-z))|].

    Exchangeable statistics get one pooled estimate over a uniformly random
    index unless explicit ``indices`` are requested; otherwise each index is
    estimated separately and the summary is the largest per-index mean.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    pooled = f.exchangeable and indices is None
    idx = None if pooled else sorted(set(range(n) if indices is None else indices))
    if idx is not None and any(not 0 <= i < n for i in idx):
        raise ValueError("indices must lie in [0, n)")

    def block(i_fixed: Optional[int]):
        def fn(r: RngStream, start: int, count: int) -> np.ndarray:
            S = dist.draw(r, (count, n))
            z = dist.draw(r, count)
            ii = r.integers(n, count) if i_fixed is None else np.full(count, i_fixed)
            out = np.empty(count)
            for k in range(count):
                out[k] = f.delta(Sample(S[k]), int(ii[k]), z[k])
            return _tail_term(out, lam)
        return fn

    if pooled:
        est = MonteCarloEstimate.from_values(run_blocks(rng, trials, block(None)), note="pooled")
        return DeltaEstimate(summary=est, pooled=True)
    per = {i: MonteCarloEstimate.from_values(run_blocks(rng.split(i), trials, block(i))) for i in idx}
    worst = max(per.values(), key=lambda e: e.mean)
    return DeltaEstimate(summary=worst, per_index=per, pooled=False)


@dataclass(frozen=True)
class TauEstimate:
    estimate: MonteCarloEstimate
    per_database: tuple
    heuristic: bool = True


def estimate_tau(
    f: FunctionUnderTest,
    dist: DomainDistribution,
    lam: float,
    n: int,
    rng: RngStream,
    n_databases: int = 64,
    trials_per_database: int = 1000,
    cap: bool = True,
) -> TauEstimate:
    """Estimate the worst-case head expectation by a max over sampled databases.

    For each of ``n_databases`` databases S, averages
    1{|f(S^(i<-y)) - f(S^(i<-z))| <= lam} |f(S^(i<-y)) - f(S^(i<-z))|
    over (y, z, i).  The max over databases is only a lower estimate of the
    true supremum over S.  ``cap=False`` drops the indicator.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if n_databases < 1:
        raise ValueError("n_databases must be positive")
    per = []
    for m in range(n_databases):
        r = rng.split(m)
        s = Sample(dist.draw(r.split(0), n))

        def fn(rb: RngStream, start: int, count: int, s=s) -> np.ndarray:
            y = dist.draw(rb, count)
            z = dist.draw(rb, count)
            ii = rb.integers(n, count)
            out = np.empty(count)
            for k in range(count):
                i = int(ii[k])
                out[k] = abs(f.delta(s, i, y[k]) - f.delta(s, i, z[k]))
            return np.where(out <= lam, out, 0.0) if cap else out

        per.append(MonteCarloEstimate.from_values(run_blocks(r.split(1), trials_per_database, fn)))
    worst = max(per, key=lambda e: e.mean)
    worst = MonteCarloEstimate(worst.mean, worst.std_error, worst.trials, worst.ci95_low, worst.ci95_high,
                               note=f"max over {n_databases} sampled databases (heuristic lower estimate)")
    return TauEstimate(estimate=worst, per_database=tuple(per))


def estimate_mean(f: FunctionUnderTest, dist: DomainDistribution, n: int, trials: int, rng: RngStream) -> MonteCarloEstimate:
    vals = run_blocks(rng, trials, lambda r, s, c: _values(f, dist.draw(r, (c, n))))
    return MonteCarloEstimate.from_values(vals)


def empirical_tail(
    f: FunctionUnderTest,
    dist: DomainDistribution,
    n: int,
    threshold: float,
    trials: int,
    rng: RngStream,
    mean_override: Optional[float] = None,
    mean_trials: Optional[int] = None,
) -> MonteCarloEstimate:
    """Fraction of fresh databases with |f(S) - f(D^n)| >= threshold.

    Without ``mean_override`` the mean is first estimated on an independent
    child stream.
    """
    if mean_override is None:
        mean = estimate_mean(f, dist, n, mean_trials or trials, rng.split(1)).mean
    else:
        mean = float(mean_override)
    vals = run_blocks(rng.split(0), trials, lambda r, s, c: _values(f, dist.draw(r, (c, n))))
    return MonteCarloEstimate.from_values(np.abs(vals - mean) >= threshold)


def empirical_tails(
    f: FunctionUnderTest,
    dist: DomainDistribution,
    n: int,
    thresholds: Sequence[float],
    trials: int,
    rng: RngStream,
    mean_override: float,
) -> list[MonteCarloEstimate]:
    """:func:`empirical_tail` at several thresholds sharing one set of databases."""
    vals = run_blocks(rng.split(0), trials, lambda r, s, c: _values(f, dist.draw(r, (c, n))))
    dev = np.abs(vals - mean_override)
    return [MonteCarloEstimate.from_values(dev >= t) for t in thresholds]


@dataclass(frozen=True)
class ExpectationCheck:
    lhs: float
    estimate: MonteCarloEstimate
    rhs: float
    holds: bool


def expectation_rhs(epsilon: float, n: int, T: int, tau: float, delta: float, simplified: bool = False) -> float:
    if simplified:
        return 4.0 * epsilon * n + 2.0 * n * T * delta
    return 2.0 * math.sinh(epsilon) * tau * n + 6.0 * delta * n * T


def expectation_bound_check(
    selector: Callable[[MultiSample, RngStream], Optional[int]],
    f: FunctionUnderTest,
    dist: DomainDistribution,
    lam: float,
    tau: float,
    delta: float,
    n: int,
    T: int,
    epsilon: float,
    trials: int,
    rng: RngStream,
    mean_reference: float = 0.0,
    simplified: bool = False,
) -> ExpectationCheck:
    """Monte Carlo check of the multi-sample expectation bound.

    ``selector(ms, rng)`` returns a 0-based subsample index or None for the
    abstain outcome.  lhs = |E[1{t != None} (f(D^n) - f(S_t))]|, compared with
    (e^eps - e^-eps) tau n + 6 delta n T, or 4 eps n + 2 n T delta when
    ``simplified``.  Holds when lhs <= rhs + 3 standard errors.
    """
    def fn(r: RngStream, start: int, count: int) -> np.ndarray:
        block = dist.draw(r.split(0), (count, T, n))
        coins = r.split(1)
        out = np.empty(count)
        for k in range(count):
            ms = MultiSample(tuple(Sample(block[k, t]) for t in range(T)))
            t = selector(ms, coins)
            out[k] = 0.0 if t is None else mean_reference - f(ms[t])
        return out

    est = MonteCarloEstimate.from_values(run_blocks(rng, trials, fn))
    lhs = abs(est.mean)
    rhs = expectation_rhs(epsilon, n, T, tau, delta, simplified)
    return ExpectationCheck(lhs, est, rhs, lhs <= rhs + 3.0 * est.std_error)
