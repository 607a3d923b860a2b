from __future__ import annotations

import numpy as np
import pytest

from dpconc import estimators as E
from dpconc.core import DomainDistribution, RngStream, constant, sample_sum
from dpconc.mechanisms import algorithm_b_selector


def test_from_values():
    e = E.MonteCarloEstimate.from_values([0, 1, 0, 1])
    assert e.mean == 0.5 and e.trials == 4
    assert e.std_error == pytest.approx(np.std([0, 1, 0, 1], ddof=1) / 2)
    with pytest.raises(ValueError):
        E.MonteCarloEstimate.from_values([])


def test_run_blocks_independent_of_threads():
    def fn(r, start, count):
        return r.uniform(count) + start

    E.set_threads(1)
    a = E.run_blocks(RngStream(3), 5000, fn)
    E.set_threads(4)
    b = E.run_blocks(RngStream(3), 5000, fn)
    E.set_threads(1)
    assert np.array_equal(a, b)
    assert a.shape == (5000,)


def test_delta_zero_for_bounded_sum():
    # Rademacher replacement moves the sum by at most 2
    d = E.estimate_delta(sample_sum(), DomainDistribution.rademacher(), 2.0, 20, 2000, RngStream(1))
    assert d.pooled and d.summary.mean == 0.0


def test_delta_pareto_against_closed_form():
    # E[1{|x - z| > lam} |x - z|] <= 16 / lam for SymmetricPareto(1, 2)
    lam = 10.0
    d = E.estimate_delta(sample_sum(), DomainDistribution.symmetric_pareto(), lam, 5, 200_000, RngStream(2))
    assert d.summary.mean <= 16.0 / lam


def test_delta_per_index():
    f = sample_sum()
    f = type(f)(f.evaluate, f.declared_sensitivity, f.replacement_delta, False, "sum", f.batch_evaluate)
    d = E.estimate_delta(f, DomainDistribution.rademacher(), 1.0, 4, 500, RngStream(3))
    assert set(d.per_index) == {0, 1, 2, 3}
    assert d.summary.mean == max(e.mean for e in d.per_index.values())
    with pytest.raises(ValueError):
        E.estimate_delta(f, DomainDistribution.rademacher(), 1.0, 4, 10, RngStream(3), indices=[9])


def test_tau_capped_below_uncapped():
    dist = DomainDistribution.symmetric_pareto()
    f = sample_sum()
    capped = E.estimate_tau(f, dist, 3.0, 10, RngStream(4), n_databases=4, trials_per_database=2000)
    raw = E.estimate_tau(f, dist, 3.0, 10, RngStream(4), n_databases=4, trials_per_database=2000, cap=False)
    assert capped.heuristic
    for c, u in zip(capped.per_database, raw.per_database):
        assert c.mean <= u.mean
    assert capped.estimate.mean <= 3.0


def test_tau_rademacher():
    # |y - z| is 0 or 2 with equal odds, so the capped mean is 1
    t = E.estimate_tau(sample_sum(), DomainDistribution.rademacher(), 2.0, 10, RngStream(5), 2, 20_000)
    assert abs(t.estimate.mean - 1.0) <= 4 * t.estimate.std_error


def test_mean_and_tail():
    dist = DomainDistribution.bernoulli(0.5)
    m = E.estimate_mean(sample_sum(), dist, 40, 20_000, RngStream(6))
    assert abs(m.mean - 20) <= 4 * m.std_error
    tail = E.empirical_tail(sample_sum(), dist, 40, 1000.0, 2000, RngStream(7), mean_override=20.0)
    assert tail.mean == 0.0
    tail = E.empirical_tail(sample_sum(), dist, 40, 0.0, 2000, RngStream(7))
    assert tail.mean == 1.0


def test_empirical_tails_monotone():
    tails = E.empirical_tails(sample_sum(), DomainDistribution.rademacher(), 30, [2, 6, 10], 5000, RngStream(8), 0.0)
    means = [t.mean for t in tails]
    assert means == sorted(means, reverse=True)


def test_expectation_rhs_forms():
    assert E.expectation_rhs(0.1, 50, 20, 1.0, 0.0, simplified=True) == pytest.approx(20.0)
    assert E.expectation_rhs(0.1, 50, 20, 1.0, 0.0) == pytest.approx(2 * np.sinh(0.1) * 50)


def test_expectation_check_constant_selector():
    f = constant(0.0)
    res = E.expectation_bound_check(lambda ms, r: 0, f, DomainDistribution.rademacher(), 1.0, 1.0, 0.0,
                                    5, 3, 0.1, 100, RngStream(9))
    assert res.lhs == 0.0 and res.holds


def test_expectation_check_algorithm_b_small():
    f = sample_sum()
    res = E.expectation_bound_check(lambda ms, r: algorithm_b_selector(ms, f, 0.0, 2.0, 0.5, r), f,
                                    DomainDistribution.rademacher(), 2.0, 1.0, 0.0, 20, 5, 0.5, 2000,
                                    RngStream(10))
    assert res.holds
