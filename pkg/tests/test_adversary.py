from __future__ import annotations

import math

import numpy as np
import pytest

from dpconc import adversary as A
from dpconc.core import RngStream
from dpconc.mechanisms import em_probs


def test_threshold_level():
    assert A.threshold_for(100, 0.5) == pytest.approx(math.sqrt(200 * math.log(4)))


def test_hypercube_validation():
    with pytest.raises(ValueError):
        A.HypercubeData(np.array([[1, 0]]))
    with pytest.raises(ValueError):
        A.HypercubeData(np.array([1, -1]))
    d = A.HypercubeData.uniform(10, 4, RngStream(0))
    assert d.n == 10 and d.d == 4
    assert np.array_equal(A.column_sums(d.negated()), -A.column_sums(d))


def test_threshold_function():
    f = A.ThresholdFunction(0, 2.5, magnitude=3.0)
    assert list(f.from_sums([0, 2, 3, -3, -10])) == [0, 0, 3, -3, -3]
    d = A.HypercubeData(np.ones((4, 2), dtype=int))
    assert f(d) == 3.0


def test_bad_index_distribution_symmetric_and_sensitivity():
    d = A.HypercubeData.uniform(30, 50, RngStream(1))
    p = A.bad_index_distribution(d, 1.0)
    assert np.allclose(p, A.bad_index_distribution(d.negated(), 1.0))
    assert np.allclose(p, em_probs(np.abs(A.column_sums(d)), 1.0, 2.0))
    # changing one row moves every |column sum| by at most 2
    rows = d.rows.copy()
    rows[0] = -rows[0]
    other = A.HypercubeData(rows)
    assert np.max(np.abs(np.abs(A.column_sums(d)) - np.abs(A.column_sums(other)))) <= 2
    ratio = np.max(np.abs(np.log(p) - np.log(A.bad_index_distribution(other, 1.0))))
    assert ratio <= 1.0 + 1e-9


def test_bad_index_draw():
    t = A.bad_index(np.array([0, 0, 100]), 2.0, RngStream(2))
    assert t == 2


def test_constants():
    assert A.utility_slack(2.0, 5000) == pytest.approx(2 * math.log(20000))
    assert A.proof_dimension(0.5) == pytest.approx(2 * 4.0 ** 45)


def test_small_overfit_experiment():
    rep = A.overfit_experiment(50, 500, 0.5, 1.0, 2.0, 100, RngStream(3))
    assert rep.freq_nonzero_on_S.mean > rep.freq_nonzero_on_fresh.mean
    assert A.overfit_gap(rep) == rep.freq_nonzero_on_S.mean
    col, freq, se = rep.worst_fixed_column()
    assert 0 <= col < 500 and 0 <= freq <= 1
    assert rep.fixed_column_fresh_freq.shape == (500,)


def test_proof_scale_rejected():
    with pytest.raises(A.InfeasibleExperiment):
        A.overfit_experiment(100, A.proof_dimension(0.5), 0.5, 1.0, 2.0, 1, RngStream(0))


def test_fixed_column_frequency_near_beta_bound():
    # a fixed column exceeds theta w.p. at most beta (Hoeffding); empirical check at small scale
    rep = A.overfit_experiment(100, 200, 0.5, 1.0, 2.0, 400, RngStream(4))
    assert rep.fixed_column_fresh_freq.mean() <= 0.5
