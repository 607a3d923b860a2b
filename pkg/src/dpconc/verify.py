"""The acceptance grid: every check returns rows of (check_id, lhs, rhs, margin, holds, trials, seed).

``margin`` is signed so that ``holds`` is exactly ``margin >= 0``.  Monte
Carlo slack (three standard errors) is folded into ``rhs``.  Check ``k``
draws only from ``RngStream(seed).split(k)``.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import stats

from . import bounds as B
from .adversary import overfit_experiment
from .applications import pareto as P
from .applications import triangles as G
from .core import DomainDistribution, MultiSample, RngStream, Sample, sample_multidatabase, sample_sum
from .estimators import empirical_tails, expectation_bound_check
from .mechanisms import (
    QualityFunction,
    algorithm_b_distribution,
    algorithm_b_selector,
    em_expected_quality_floor,
    em_failure_mass,
    em_output_distribution,
    em_probs,
    generate_neighbors,
    max_log_ratio,
    simplified_b_selector,
    transfer_check,
    verify_flambda_privacy,
)

EPS_CHOICES = (0.1, 0.5, 1.0, 2.0)
TOL = 1e-9


class CheckRow(NamedTuple):
    check_id: str
    lhs: float
    rhs: float
    margin: float
    holds: bool
    trials: int
    seed: int


def at_most(cid: str, lhs: float, rhs: float, trials: int, seed: int) -> CheckRow:
    m = rhs - lhs
    return CheckRow(cid, float(lhs), float(rhs), float(m), bool(m >= 0), int(trials), seed)


def at_least(cid: str, lhs: float, rhs: float, trials: int, seed: int) -> CheckRow:
    m = lhs - rhs
    return CheckRow(cid, float(lhs), float(rhs), float(m), bool(m >= 0), int(trials), seed)


def _cap(default: int, trials: Optional[int]) -> int:
    return default if trials is None else max(2, min(default, trials))


def _linear_em_instance(r: RngStream):
    """Random linear quality q(d, h) = lam_q <w_h, d> on data in [0, 1]^m, and a neighbor."""
    H = 1 + r.integers(32)
    m = 5 + r.integers(20)
    lam_q = 0.5 + 2.0 * r.uniform()
    W = 2.0 * r.uniform((H, m)) - 1.0
    data = r.uniform(m)
    other = data.copy()
    other[r.integers(m)] = r.uniform()
    q = QualityFunction(range(H), lambda d, h: lam_q * float(W[h] @ d), lam_q)
    return q, data, other


# 1-5: exact verifiers --------------------------------------------------------


def check_em_privacy(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(1)
    worst = -math.inf
    k_max = _cap(200, trials)
    for k in range(k_max):
        r = rng.split(k)
        q, data, other = _linear_em_instance(r)
        if not q.respects_sensitivity(data, other):
            raise AssertionError("generated pair violates the declared sensitivity")
        eps = EPS_CHOICES[k % len(EPS_CHOICES)]
        ratio = max_log_ratio(em_output_distribution(q, data, eps), em_output_distribution(q, other, eps))
        worst = max(worst, ratio - eps)
    return [at_most("1", worst, TOL, k_max, seed)]


def check_em_utility(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(2)
    worst = -math.inf
    k_max = _cap(500, trials)
    for k in range(k_max):
        r = rng.split(k)
        q, data, _ = _linear_em_instance(r)
        eps = EPS_CHOICES[k % len(EPS_CHOICES)]
        scores = q.scores(data)
        for gap in q.sensitivity * np.geomspace(0.05, 40.0, 10):
            mass, bound = em_failure_mass(scores, eps, q.sensitivity, gap)
            worst = max(worst, mass - bound)
    return [at_most("2", worst, 1e-12, k_max, seed)]


def check_em_quality_floor(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(3)
    worst = math.inf
    k_max = _cap(500, trials)
    for k in range(k_max):
        r = rng.split(k)
        H = 1 + r.integers(64)
        scale = 10.0 ** (4.0 * r.uniform() - 2.0)
        h = scale * (2.0 * r.uniform(H) - 1.0)
        eta = 10.0 ** (4.0 * r.uniform() - 2.0)
        res = em_expected_quality_floor(h, eta)
        worst = min(worst, res.expected_quality - res.floor)
    return [at_least("3", worst, -TOL, k_max, seed)]


def check_expectation_transfer(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(4)
    worst = -math.inf
    k_max = _cap(200, trials)
    for k in range(k_max):
        r = rng.split(k)
        q, data, other = _linear_em_instance(r)
        eps = EPS_CHOICES[k % len(EPS_CHOICES)]
        h = 2.0 * r.uniform(len(q.candidates)) - 1.0
        res = transfer_check(em_output_distribution(q, data, eps), em_output_distribution(q, other, eps), h, eps)
        worst = max(worst, res.lhs - res.rhs_full)
    return [at_most("4", worst, 1e-12, k_max, seed)]


def check_algorithm_b_privacy(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(5)
    f = sample_sum()
    dist = DomainDistribution.rademacher()
    lam = 2.0
    rows = []
    k_max = _cap(100, trials)
    for e_idx, eps in enumerate((0.1, 1.0)):
        worst = -math.inf
        for k in range(k_max // 2):
            r = rng.split(e_idx).split(k)
            ms = sample_multidatabase(dist, 10, 5, r.split(0))
            other = generate_neighbors(ms, f, lam, r.split(1))

            def law(x: MultiSample) -> np.ndarray:
                return algorithm_b_distribution(x, f, 0.0, lam, eps)

            worst = max(worst, verify_flambda_privacy(law, ms, other, f, lam) - eps)
        rows.append(at_most(f"5-eps{eps:g}", worst, TOL, k_max // 2, seed))
    return rows


# 6-9: Monte Carlo against classical bounds ------------------------------------


def check_simplified_expectation(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(6)
    f = sample_sum()
    n, T, eps, k_max = 50, 20, 0.1, _cap(10_000, trials)
    res = expectation_bound_check(lambda ms, r: simplified_b_selector(ms, f, eps, r), f,
                                  DomainDistribution.rademacher(), 1.0, 1.0, 0.0, n, T, eps, k_max, rng,
                                  simplified=True)
    return [at_most("6", res.lhs, res.rhs + 3.0 * res.estimate.std_error, k_max, seed)]


def check_full_expectation(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(7)
    f = sample_sum()
    n, T, eps, lam, tau, k_max = 50, 20, 0.1, 2.0, 1.0, _cap(10_000, trials)
    res = expectation_bound_check(lambda ms, r: algorithm_b_selector(ms, f, 0.0, lam, eps, r), f,
                                  DomainDistribution.rademacher(), lam, tau, 0.0, n, T, eps, k_max, rng)
    return [at_most("7", res.lhs, res.rhs + 3.0 * res.estimate.std_error, k_max, seed)]


def check_hoeffding(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(8)
    n, k_max, devs = 200, _cap(100_000, trials), (10, 20, 30)
    tails = empirical_tails(sample_sum(), DomainDistribution.bernoulli(0.5), n, devs, k_max, rng, n * 0.5)
    return [at_most(f"8-dev{d}", e.mean, B.hoeffding_tail(n, d) + 3.0 * e.std_error, k_max, seed)
            for d, e in zip(devs, tails)]


def check_chernoff_floor(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(9)
    n, p, delta, k_max = 96, 0.5, 0.25, _cap(100_000, trials)
    floor = B.chernoff_tightness_floor(n, p, delta)
    # Pr[sum <= (1 - delta) p n] as a deviation of at least delta p n below the mean
    vals = np.concatenate([
        (rng.split(b).uniform((min(1024, k_max - s), n)) < p).sum(axis=1)
        for b, s in enumerate(range(0, k_max, 1024))
    ])
    freq = float(np.mean(vals <= (1 - delta) * p * n))
    rhs = floor.value if floor.valid else math.inf
    return [at_least("9", freq, rhs, k_max, seed)]


# 10-11: exhaustive and random oracle sweeps ------------------------------------


def check_entropy_tail(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    worst = -math.inf
    count = 0
    for n in range(1, 31):
        for p in (0.1, 0.3, 0.5):
            for k in range(n + 1):
                if not p < k / n < 1:
                    continue
                exact = float(stats.binom.sf(k - 1, n, p))
                bound = B.binomial_tail_entropy_bound(n, p, k)
                worst = max(worst, exact - bound * (1 + 1e-12))
                count += 1
    return [at_most("10", worst, 0.0, count, seed)]


def check_entropy_floor(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(11)
    worst = math.inf
    k_max = 100
    for k in range(k_max):
        r = rng.split(k)
        b = 0.1 + 1.9 * r.uniform()
        c = b + 0.1 + 1.9 * r.uniform()
        N = max(2.0 ** (1.0 / b), 2.0 ** (8.0 / (c - b))) * 10.0 ** (3.0 * r.uniform())
        res = B.relative_entropy_floor_check(b, c, N)
        if not res.condition_met:
            raise AssertionError("sampled (b, c, N) outside the floor's validity range")
        worst = min(worst, res.lhs / res.rhs - 1.0)
    return [at_least("11", worst, 0.0, k_max, seed)]


# 12-14: scenario pipelines -------------------------------------------------------


def check_bad_index(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(12)
    k_max = _cap(1000, trials)
    rep = overfit_experiment(100, 5000, 0.5, 1.0, 2.0, k_max, rng)
    u = rep.freq_utility_event
    col, freq, se = rep.worst_fixed_column()
    return [
        at_least("12a", u.mean, 0.75 - 3.0 * u.std_error, k_max, seed),
        at_least("12b", rep.freq_nonzero_on_S.mean, 0.5, k_max, seed),
        at_most("12c", freq, rep.beta + 3.0 * se, k_max, seed),
    ]


def check_triangles(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(13)
    mism = 0
    for k in range(100):
        r = rng.split(0).split(k)
        N = 3 + r.integers(28)
        g = G.sample_gnp(N, r.uniform(), r)
        mism += G.count_triangles(g) != G.count_triangles_bruteforce(g)
    rows = [at_most("13a", mism, 0, 100, seed)]
    k_max = _cap(2000, trials)
    rep = G.triangle_experiment(100, k_max, rng.split(1))
    m = rep.empirical_mean
    rows.append(at_most("13b", abs(m.mean - rep.expected), 3.0 * m.std_error, k_max, seed))
    c = rep.codegree_tail
    rows.append(at_most("13c", c.mean, rep.codegree_bound + 3.0 * c.std_error, k_max, seed))
    for a in sorted(rep.tails):
        e = rep.tails[a]
        rows.append(at_most(f"13d-alpha{a:g}", e.mean, rep.bounds[a].probability + 3.0 * e.std_error, k_max, seed))
    return rows


PARETO_TS = (1e3, 1e4, 1e5)


def check_pareto(seed: int, trials: Optional[int] = None) -> list[CheckRow]:
    rng = RngStream(seed).split(14)
    n, k_max = 100, _cap(1_000_000, trials)
    tails = empirical_tails(sample_sum(), DomainDistribution.symmetric_pareto(1.0, 2.0), n, PARETO_TS,
                            k_max, rng, 0.0)
    rows = [at_most(f"14-t{t:g}", e.mean, P.pareto_tail_bound(n, t).probability + 3.0 * e.std_error, k_max, seed)
            for t, e in zip(PARETO_TS, tails)]
    slope = P.pareto_bound_slope(n, np.geomspace(n, 100 * n, 13))
    rows.append(at_least("14-slope-lo", slope, -3.5, 0, seed))
    rows.append(at_most("14-slope-hi", slope, -1.5, 0, seed))
    return rows


CHECKS: dict[int, Callable[..., list[CheckRow]]] = {
    1: check_em_privacy,
    2: check_em_utility,
    3: check_em_quality_floor,
    4: check_expectation_transfer,
    5: check_algorithm_b_privacy,
    6: check_simplified_expectation,
    7: check_full_expectation,
    8: check_hoeffding,
    9: check_chernoff_floor,
    10: check_entropy_tail,
    11: check_entropy_floor,
    12: check_bad_index,
    13: check_triangles,
    14: check_pareto,
}


def criterion_of(check_id: str) -> int:
    digits = ""
    for ch in check_id:
        if not ch.isdigit():
            break
        digits += ch
    return int(digits)


def run_all(seed: int, trials: Optional[int] = None, only=None) -> list[CheckRow]:
    rows: list[CheckRow] = []
    for k, fn in CHECKS.items():
        if only is None or k in only:
            rows.extend(fn(seed, trials))
    return rows
