from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from dpconc.applications import pareto as P
from dpconc.applications import subgaussian as SG
from dpconc.applications import triangles as G
from dpconc.core import DomainDistribution, RngStream, sample_sum
from dpconc.estimators import estimate_delta

# Reference values computed once with mpmath at 40 digits.
SG_DELTA_AT_SIGMA = 3.639183958275800541622797209947082720651
KONT_1_100_50 = 7.453306344157341985849702951900852360675e-06
RADEMACHER_SIGMA = {0.25: 1.406949690532795, 0.5: 1.386301594651193, 1.0: 1.317240798765400, 2.0: 1.151087636697512}
TRIANGLES_N100 = 5.113402976492269379842210861347705869025


# subgaussian ------------------------------------------------------------------------


def test_subgaussian_delta_values():
    assert SG.subgaussian_delta(0.0, 2.0) == pytest.approx(6.0)
    assert SG.subgaussian_delta(1.0, 1.0) == pytest.approx(SG_DELTA_AT_SIGMA, rel=1e-14)
    assert SG.subgaussian_delta(3.0, 3.0) == pytest.approx(3 * SG_DELTA_AT_SIGMA, rel=1e-14)
    with pytest.raises(ValueError):
        SG.subgaussian_delta(1.0, 0.0)


def test_subgaussian_delta_decreasing_past_two_sigma():
    lams = np.linspace(2.0, 10.0, 50)
    vals = [SG.subgaussian_delta(l, 1.0) for l in lams]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0])
def test_subgaussian_delta_derivation(lam):
    # tail expectation <= lam Pr[rho > lam] + int_lam^inf Pr[rho > u] du under Pr[rho >= u] <= 2 e^{-u^2/2}
    sigma = 1.0
    tail = lambda u: min(1.0, 2.0 * math.exp(-u * u / (2 * sigma ** 2)))
    integral, _ = integrate.quad(tail, lam, math.inf)
    direct = lam * tail(lam) + integral
    # the erfc term sqrt(2 pi) sigma erfc(lam / (sqrt 2 sigma)) bounded with erfc(x) <= e^{-x^2}
    via_bound = 2 * lam * math.exp(-lam ** 2 / 2) + math.sqrt(2 * math.pi) * sigma * math.exp(-lam ** 2 / 2)
    assert direct <= via_bound + 1e-12
    assert via_bound <= SG.subgaussian_delta(lam, sigma)


def test_head_bound():
    assert SG.subgaussian_head(0.5, 1.0) == 0.5
    assert SG.subgaussian_head(10.0, 1.0) == pytest.approx(math.sqrt(2 * math.pi))


def test_kontorovich_reference():
    assert SG.kontorovich_reference(1.0, 100, 0.0) == 1.0
    assert SG.kontorovich_reference(1.0, 100, 50.0) == pytest.approx(KONT_1_100_50, rel=1e-12)
    ts = np.linspace(0, 100, 30)
    vals = [SG.kontorovich_reference(1.0, 100, t) for t in ts]
    assert vals == sorted(vals, reverse=True)


def test_subgaussian_bound_monotone_in_t():
    ts = np.geomspace(2000, 40000, 8)
    vals = [SG.subgaussian_tail_bound(1.0, 10_000, t).probability for t in ts]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_subgaussian_weaker_than_reference():
    n = 10_000
    b = SG.subgaussian_tail_bound(1.0, n, 1.0 * n)
    assert b.probability <= 1.0
    assert b.probability > SG.kontorovich_reference(1.0, n, 1.0 * n)


@pytest.mark.parametrize("c", [0.5, 3.0, 10.0])
def test_subgaussian_scaling(c):
    n, t, sigma = 10_000, 15_000.0, 1.0
    a = SG.subgaussian_tail_bound(sigma, n, t)
    b = SG.subgaussian_tail_bound(c * sigma, n, c * t)
    assert b.probability == pytest.approx(a.probability, rel=1e-6)
    assert b.lam == pytest.approx(c * a.lam, rel=1e-12)


def test_display_form_branches():
    assert SG.display_form(1.0, 100, 500.0) == pytest.approx(math.exp(-50.0))
    assert SG.display_form(1.0, 100, 8000.0) == pytest.approx(math.exp(-(8000.0 ** (2 / 3))))


def _rademacher_exact_sigma(lams):
    best = 0.0
    for lam in lams:
        m = 0.0
        for x, y, xi in itertools.product((-1, 1), (-1, 1), (-1, 1)):
            m += math.exp(lam * xi * abs(x - y)) / 8
        best = max(best, math.sqrt(2 * math.log(m) / lam ** 2))
    return best


def test_rademacher_oracle_matches_closed_form():
    for lam, s in RADEMACHER_SIGMA.items():
        assert _rademacher_exact_sigma([lam]) == pytest.approx(s, rel=1e-12)


def test_diameter_estimate_rademacher():
    grid = list(RADEMACHER_SIGMA)
    est = SG.estimate_subgaussian_diameter(DomainDistribution.rademacher(), SG.absolute_difference, 400_000,
                                           grid, RngStream(1))
    exact = _rademacher_exact_sigma(grid)
    assert est.heuristic
    assert abs(est.sigma - exact) <= 3 * est.std_error


def test_diameter_zero_metric():
    zero = lambda x, y: np.zeros(np.shape(x))
    est = SG.estimate_subgaussian_diameter(DomainDistribution.rademacher(), zero, 1000, [0.5, 1.0], RngStream(2))
    assert est.sigma == 0.0


def test_diameter_sign_convention():
    grid = [0.25, 0.5, 1.0]
    a = SG.estimate_subgaussian_diameter(DomainDistribution.rademacher(), SG.absolute_difference, 200_000, grid,
                                         RngStream(3))
    b = SG.estimate_subgaussian_diameter(DomainDistribution.rademacher(), SG.absolute_difference, 200_000,
                                         [-l for l in grid], RngStream(3))
    assert a.sigma == b.sigma


def test_diameter_drops_overflow():
    grid = [0.5, 1e6]
    est = SG.estimate_subgaussian_diameter(DomainDistribution.symmetric_pareto(), SG.absolute_difference, 1000,
                                           grid, RngStream(4))
    assert 1e6 in est.dropped
    with pytest.raises(ValueError):
        SG.estimate_subgaussian_diameter(DomainDistribution.rademacher(), SG.absolute_difference, 10, [0.0],
                                         RngStream(4))


# pareto ------------------------------------------------------------------------------


def test_pareto_constants():
    assert P.pareto_constants(1.0, "abstract") == (2.0, 2.0)
    assert P.pareto_constants(10.0, "abstract")[0] == pytest.approx(0.2)
    assert P.pareto_constants(10.0, "instantiated") == (1.6, 4.0)
    with pytest.raises(ValueError):
        P.pareto_constants(1.5, "instantiated")
    with pytest.raises(ValueError):
        P.pareto_constants(0.5, "abstract")


def test_pareto_profile_caps_tau():
    p = P.pareto_profile(1.0, "abstract")
    assert p.delta == 2.0 and p.tau == 1.0 and p.tau_formula == 2.0
    assert p.variant is P.Variant.ABSTRACT
    q = P.pareto_profile(10.0)
    assert (q.delta, q.tau) == (1.6, 4.0) and q.variant is P.Variant.INSTANTIATED


def test_pareto_delta_monte_carlo():
    lam = 10.0
    est = estimate_delta(sample_sum(), DomainDistribution.symmetric_pareto(), lam, 4, 400_000, RngStream(5))
    assert est.summary.mean - 3 * est.summary.std_error <= P.pareto_constants(lam)[0]


def test_pareto_bound_monotone():
    ts = np.geomspace(3e3, 1e5, 6)
    vals = [P.pareto_tail_bound(100, t).probability for t in ts]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_pareto_slope_in_range():
    s = P.pareto_bound_slope(100, np.geomspace(100, 10_000, 13))
    assert -3.5 <= s <= -1.5


def test_pareto_display_forms():
    assert P.display_forms(100, 50.0) == pytest.approx((0.4, 0.08))
    assert P.display_forms(100, 5.0) == (1.0, 1.0)
    a, b = P.display_forms(100, 1e4)
    assert a == pytest.approx(1e3 / 1e8) and b == pytest.approx(100 / 1e8)
    with pytest.raises(ValueError):
        P.pareto_tail_bound(1, 10.0)


def test_log_log_slope():
    ts = np.array([1.0, 10.0, 100.0])
    assert P.log_log_slope(ts, 0.5 * ts ** -2.0) == pytest.approx(-2.0)
    assert math.isnan(P.log_log_slope(ts, [1.0, 1.0, 0.5]))


# triangles -----------------------------------------------------------------------------


def test_edge_indexing_matches_triu():
    N = 7
    iu = np.triu_indices(N, k=1)
    for k, (i, j) in enumerate(zip(*iu)):
        assert G.edge_index(N, i, j) == k == G.edge_index(N, j, i)
    with pytest.raises(ValueError):
        G.edge_index(N, 2, 2)
    assert G.vertices_for(21) == 7


def test_edge_sample_access():
    g = G.EdgeSample.empty(5).with_edge(1, 3, 1)
    assert g.edge(1, 3) == g.edge(3, 1) == 1
    assert g.edge_count() == 1
    A = g.adjacency()
    assert np.array_equal(A, A.T) and np.all(np.diag(A) == 0)


def test_special_graphs():
    assert G.count_triangles(G.EdgeSample.complete(4)) == 4
    assert G.count_triangles(G.EdgeSample.empty(10)) == 0
    assert G.codegree(G.EdgeSample.complete(4), 0, 3) == 2
    assert G.sample_gnp(6, 1.0, RngStream(0)) == G.EdgeSample.complete(6)
    assert G.sample_gnp(6, 0.0, RngStream(0)) == G.EdgeSample.empty(6)
    with pytest.raises(ValueError):
        G.codegree(G.EdgeSample.complete(4), 1, 1)


def test_fast_count_matches_bruteforce():
    for k in range(100):
        r = RngStream(6).split(k)
        N = 3 + r.integers(28)
        g = G.sample_gnp(N, r.uniform(), r)
        assert G.count_triangles(g) == G.count_triangles_bruteforce(g)


def test_codegree_identities():
    for k in range(100):
        r = RngStream(7).split(k)
        N = 4 + r.integers(20)
        g = G.sample_gnp(N, 0.4, r)
        i, j = sorted(int(v) for v in r.integers(N, 2))
        if i == j:
            j = (i + 1) % N
        with_e, without = g.with_edge(i, j, 1), g.with_edge(i, j, 0)
        assert G.codegree(with_e, i, j) == G.codegree(without, i, j)
        assert G.count_triangles(with_e) - G.count_triangles(without) == G.codegree(g, i, j)
        total = sum(g.edge(a, b) * G.codegree(g, a, b) for a, b in itertools.combinations(range(N), 2))
        assert 3 * G.count_triangles(g) == total


def test_triangle_function_fast_path():
    N = 8
    f = G.triangle_function(N)
    from dpconc.core import check_replacement_delta

    assert check_replacement_delta(f, DomainDistribution.bernoulli(0.5), G.pairs(N), RngStream(8), 100) == 0.0


def test_edge_count_binomial():
    N, p, trials = 30, 0.2, 1000
    counts = np.array([G.sample_gnp(N, p, RngStream(9).split(k)).edge_count() for k in range(trials)])
    se = counts.std(ddof=1) / math.sqrt(trials)
    assert abs(counts.mean() - p * G.pairs(N)) <= 3 * se


def test_codegree_distribution_mean():
    N, p, trials = 40, 0.3, 300
    iu = np.triu_indices(N, k=1)
    means = []
    for k in range(trials):
        A = G.sample_gnp(N, p, RngStream(10).split(k)).adjacency().astype(float)
        means.append((A @ A)[iu].mean())
    means = np.array(means)
    assert abs(means.mean() - (N - 2) * p * p) <= 3 * means.std(ddof=1) / math.sqrt(trials)


def test_expected_count():
    N = 100
    assert G.expected_triangles(N, G.default_p(N)) == pytest.approx(TRIANGLES_N100, rel=1e-12)


def test_profile_defaults_and_flags():
    prof = G.triangle_profile(100)
    assert prof.p == pytest.approx(100 ** -0.75)
    assert prof.lam == pytest.approx(100 ** (1 / 13))
    assert prof.tau == pytest.approx(2 * prof.p * prof.lam) and prof.tau <= prof.lam
    assert prof.delta == prof.delta_entropy
    assert not prof.claim_condition_met and prof.flags
    assert prof.epsilon == pytest.approx(math.sqrt(prof.lam / (G.pairs(100) * prof.p)))
    bad = G.triangle_profile(100, lam=200.0)
    assert not bad.domain_ok
    assert not G.triangle_profile(100, p=0.6, lam=50.0).domain_ok


def test_delta_chain_at_million():
    chain = G.delta_chain(10 ** 6)
    assert chain["exact"] <= chain["markov"] <= chain["entropy"] <= chain["specialized"]
    assert G.triangle_profile(10 ** 6).claim_condition_met


def test_kimvu_order():
    lo, hi = G.kimvu_reference(100, G.default_p(100))
    assert lo <= hi


def test_small_triangle_experiment():
    rep = G.triangle_experiment(40, 200, RngStream(11))
    assert abs(rep.empirical_mean.mean - rep.expected) <= 4 * rep.empirical_mean.std_error
    for a, tail in rep.tails.items():
        assert tail.mean <= rep.bounds[a].probability + 3 * tail.std_error
    with pytest.raises(ValueError):
        G.triangle_experiment(3000, 2, RngStream(0))
