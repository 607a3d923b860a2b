from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpconc.core import (
    DomainDistribution,
    MultiSample,
    RngStream,
    Sample,
    check_replacement_delta,
    constant,
    sample,
    sample_database,
    sample_multidatabase,
    sample_sum,
)


def test_stream_reproducible_and_children_differ():
    a = RngStream(7).split(3).uniform(5)
    b = RngStream(7).split(3).uniform(5)
    c = RngStream(7).split(4).uniform(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(RngStream(7).uniform(5), RngStream(8).uniform(5))


def test_split_depth_limit():
    r = RngStream(1).split(0).split(1).split(2).split(3)
    with pytest.raises(ValueError):
        r.split(0)


def test_seed_range():
    with pytest.raises(ValueError):
        RngStream(-1)
    RngStream(2 ** 64 - 1)


def test_raw_bits_fair():
    bits = RngStream(3).raw_bits(200_000)
    assert bits.shape == (200_000,)
    assert set(np.unique(bits)) <= {0, 1}
    assert abs(bits.mean() - 0.5) < 3 * 0.5 / np.sqrt(bits.size) + 1e-3


def test_integers_range():
    x = RngStream(5).integers(7, 10_000)
    assert x.min() == 0 and x.max() == 6


@pytest.mark.parametrize("dist", [
    DomainDistribution.rademacher(),
    DomainDistribution.bernoulli(0.3),
    DomainDistribution.symmetric_pareto(),
])
def test_draw_shapes_and_support(dist):
    x = dist.draw(RngStream(1), (4, 6))
    assert x.shape == (4, 6)
    if dist.kind.value == "rademacher":
        assert set(np.unique(x)) <= {-1, 1}
    if dist.kind.value == "bernoulli":
        assert set(np.unique(x)) <= {0, 1}
    if dist.kind.value == "symmetric_pareto":
        assert np.all(np.abs(x) >= 1.0)


def test_hypercube_rows():
    d = DomainDistribution.hypercube_row(5)
    x = d.draw(RngStream(2), 3)
    assert x.shape == (3, 5)


def test_pareto_tail_matches_inverse_cdf():
    x = DomainDistribution.symmetric_pareto().draw(RngStream(11), 200_000)
    for u in (2.0, 5.0, 10.0):
        emp = np.mean(np.abs(x) >= u)
        se = np.sqrt(emp * (1 - emp) / x.size)
        assert abs(emp - u ** -2) <= 4 * se
    assert abs(np.mean(x > 0) - 0.5) < 0.01


def test_bernoulli_mean():
    x = DomainDistribution.bernoulli(0.2).draw(RngStream(4), 100_000)
    assert abs(x.mean() - 0.2) < 4 * np.sqrt(0.16 / x.size)


def test_invalid_distributions():
    with pytest.raises(ValueError):
        DomainDistribution.bernoulli(1.5)
    with pytest.raises(ValueError):
        DomainDistribution.symmetric_pareto(exponent=1.0)
    with pytest.raises(ValueError):
        DomainDistribution.symmetric_pareto(min=0.0)
    with pytest.raises(ValueError):
        DomainDistribution.hypercube_row(0)


def test_sample_is_immutable_and_replace_copies():
    s = Sample(np.array([1, 2, 3]))
    with pytest.raises(ValueError):
        s.elements[0] = 5
    t = s.replace(1, 9)
    assert list(t.elements) == [1, 9, 3]
    assert list(s.elements) == [1, 2, 3]
    with pytest.raises(IndexError):
        s.replace(3, 0)


def test_sample_requires_elements():
    with pytest.raises(ValueError):
        Sample(np.array([]))


def test_single_draw():
    assert sample(DomainDistribution.rademacher(), RngStream(0)) in (-1, 1)


def test_multisample_validation():
    with pytest.raises(ValueError):
        MultiSample((Sample(np.ones(3)), Sample(np.ones(4))))
    ms = sample_multidatabase(DomainDistribution.rademacher(), 8, 3, RngStream(0))
    assert ms.T == 3 and ms.n == 8


def test_neighbor_predicate():
    f = sample_sum()
    ms = MultiSample((Sample(np.array([1, 1, 1])), Sample(np.array([-1, 1, 1]))))
    other = ms.with_subsample(0, Sample(np.array([1, 1, -1])))
    assert ms.is_f_lambda_neighbor(other, f, 2.0)
    assert not ms.is_f_lambda_neighbor(other, f, 1.0)
    assert ms.is_f_lambda_neighbor(ms, f, 0.0)


def test_replacement_fast_path_agrees():
    worst = check_replacement_delta(sample_sum(), DomainDistribution.symmetric_pareto(), 20, RngStream(9), 300)
    assert worst <= 1e-12


def test_constant_function():
    f = constant(3.5)
    s = sample_database(DomainDistribution.rademacher(), 5, RngStream(1))
    assert f(s) == 3.5 and f.delta(s, 0, 1) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 40))
def test_batch_sum_matches_scalar(seed, n):
    dist = DomainDistribution.symmetric_pareto()
    block = dist.draw(RngStream(seed), (5, n))
    f = sample_sum()
    assert np.allclose(f.batch_evaluate(block), [f(Sample(row)) for row in block], rtol=1e-12, atol=0)
