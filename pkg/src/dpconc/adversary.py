"""A private selector that overfits: BadIndex over threshold functions on {-1, +1}^d."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .estimators import MonteCarloEstimate
from .mechanisms import draw_index, em_probs

# quality |column sum| moves by at most 2 when one row changes, hence eps/(2*2) = eps/4
BAD_INDEX_SENSITIVITY = 2.0
MAX_CELLS = 50_000_000


class InfeasibleExperiment(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HypercubeData:
    rows: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.rows)
        if a.ndim != 2:
            raise ValueError("rows must form an n x d array")
        if not np.all((a == 1) | (a == -1)):
            raise ValueError("entries must be +1 or -1")
        a = a.astype(np.int8)
        a.setflags(write=False)
        object.__setattr__(self, "rows", a)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def uniform(cls, n: int, d: int, rng: RngStream) -> "HypercubeData":
        return cls(_uniform_signs(n, d, rng))

    def negated(self) -> "HypercubeData":
        return HypercubeData(-self.rows)


def _uniform_signs(n: int, d: int, rng: RngStream) -> np.ndarray:
    return (2 * rng.raw_bits(n * d).astype(np.int8) - 1).reshape(n, d)


def column_sums(data: HypercubeData) -> np.ndarray:
    return data.rows.sum(axis=0, dtype=np.int64)


def threshold_for(n: int, beta: float) -> float:
    """sqrt(2 n ln(2 / beta)), the level a fixed column exceeds with probability at most beta."""
    return math.sqrt(2.0 * n * math.log(2.0 / beta))


@dataclass(frozen=True)
class ThresholdFunction:
    """0 if |column sum| <= theta, else sign(column sum) * magnitude."""

    column: int
    theta: float
    magnitude: float = 1.0

    def from_sums(self, sums) -> np.ndarray:
        s = np.asarray(sums)
        return np.where(np.abs(s) > self.theta, np.sign(s) * self.magnitude, 0.0)

    def __call__(self, data: HypercubeData) -> float:
        return float(self.from_sums(column_sums(data)[self.column]))


def bad_index_distribution(data: HypercubeData | np.ndarray, epsilon: float) -> np.ndarray:
    """Column law proportional to exp(eps/4 |column sum|); accepts data or its column sums."""
    sums = column_sums(data) if isinstance(data, HypercubeData) else np.asarray(data)
    return em_probs(np.abs(sums), epsilon, BAD_INDEX_SENSITIVITY)


def bad_index(data: HypercubeData | np.ndarray, epsilon: float, rng: RngStream) -> int:
    return draw_index(bad_index_distribution(data, epsilon), rng)


def utility_slack(epsilon: float, d: int) -> float:
    """(4 / eps) ln(4 d): the selected |sum| is within this of the max w.p. >= 3/4."""
    return 4.0 / epsilon * math.log(4.0 * d)


def proof_dimension(beta: float) -> float:
    """2 (2 / beta)^45, the dimension under which the overfitting guarantee is proved."""
    return 2.0 * (2.0 / beta) ** 45


@dataclass(frozen=True)
class OverfitReport:
    n: int
    d: int
    beta: float
    magnitude: float
    epsilon: float
    theta: float
    freq_nonzero_on_S: MonteCarloEstimate
    freq_nonzero_on_fresh: MonteCarloEstimate
    freq_utility_event: MonteCarloEstimate
    mean_selected_abs_sum: MonteCarloEstimate
    mean_max_abs_sum: MonteCarloEstimate
    fixed_column_fresh_freq: np.ndarray
    trials: int

    def worst_fixed_column(self) -> tuple[int, float, float]:
        """(column, frequency, std error) of the column most often nonzero on fresh data."""
        t = int(np.argmax(self.fixed_column_fresh_freq))
        p = float(self.fixed_column_fresh_freq[t])
        return t, p, math.sqrt(p * (1 - p) / self.trials)


def overfit_experiment(n: int, d: float, beta: float, magnitude: float, epsilon: float,
                       trials: int, rng: RngStream) -> OverfitReport:
    """Run BadIndex on uniform data and evaluate the chosen f_t on the data and on fresh data.

    Trial k uses ``rng.split(k)``: child 0 for the data, 1 for the selection,
    2 for the fresh dataset.
    """
    if min(n, d, beta, magnitude, epsilon, trials) <= 0:
        raise ValueError("all parameters must be positive")
    if n * d > MAX_CELLS:
        raise InfeasibleExperiment(f"n*d = {n * d:.3g} exceeds the memory budget of {MAX_CELLS} cells")
    d = int(d)
    theta = threshold_for(n, beta)
    f_template = ThresholdFunction(0, theta, magnitude)
    slack = utility_slack(epsilon, d)
    on_s = np.empty(trials)
    on_fresh = np.empty(trials)
    util = np.empty(trials)
    sel_abs = np.empty(trials)
    max_abs = np.empty(trials)
    fresh_counts = np.zeros(d, dtype=np.int64)
    for k in range(trials):
        r = rng.split(k)
        sums = _uniform_signs(n, d, r.split(0)).sum(axis=0, dtype=np.int64)
        t = bad_index(sums, epsilon, r.split(1))
        fresh = _uniform_signs(n, d, r.split(2)).sum(axis=0, dtype=np.int64)
        a = np.abs(sums)
        on_s[k] = f_template.from_sums(sums[t]) != 0
        on_fresh[k] = f_template.from_sums(fresh[t]) != 0
        util[k] = a[t] >= a.max() - slack
        sel_abs[k] = a[t]
        max_abs[k] = a.max()
        fresh_counts += np.abs(fresh) > theta
    est = MonteCarloEstimate.from_values
    return OverfitReport(
        n=n, d=d, beta=beta, magnitude=magnitude, epsilon=epsilon, theta=theta,
        freq_nonzero_on_S=est(on_s),
        freq_nonzero_on_fresh=est(on_fresh),
        freq_utility_event=est(util),
        mean_selected_abs_sum=est(sel_abs),
        mean_max_abs_sum=est(max_abs),
        fixed_column_fresh_freq=fresh_counts / trials,
        trials=trials,
    )


def overfit_gap(report: OverfitReport) -> float:
    """|f_t*(S) - f_t*(U^n)| averaged over trials; f_t(U^n) = 0 by symmetry."""
    return report.magnitude * report.freq_nonzero_on_S.mean
