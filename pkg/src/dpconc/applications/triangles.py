"""Triangle counts in G(N, p) graphs."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..bounds import SensitivityProfile, binomial_tail_entropy_bound, relative_entropy
from ..core import FunctionUnderTest, RngStream, Sample
from ..estimators import MonteCarloEstimate
from .common import ScenarioBound, best_bound_over_lambda

MAX_VERTICES = 2000
BRUTE_FORCE_MAX = 60
ALPHAS = (0.5, 1.0, 2.0)


def pairs(N: int) -> int:
    return N * (N - 1) // 2


def vertices_for(n_edges: int) -> int:
    N = int(round((1 + math.sqrt(1 + 8 * n_edges)) / 2))
    if pairs(N) != n_edges:
        raise ValueError(f"{n_edges} is not a triangular number of vertex pairs")
    return N


def edge_index(N: int, i: int, j: int) -> int:
    """Position of {i, j} in row-major upper-triangle order."""
    if i == j:
        raise ValueError("no self-loops")
    if i > j:
        i, j = j, i
    if not 0 <= i < j < N:
        raise IndexError(f"vertex pair ({i}, {j}) out of range for N={N}")
    return i * N - i * (i + 1) // 2 + (j - i - 1)


@dataclass(frozen=True, eq=False)
class EdgeSample:
    """Undirected simple graph stored as packed upper-triangle edge bits."""

    N: int
    packed: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        packed = np.asarray(self.packed, dtype=np.uint8).copy()
        if packed.size != -(-pairs(self.N) // 8):
            raise ValueError("packed array has the wrong length")
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_bits(cls, N: int, bits) -> "EdgeSample":
        bits = np.asarray(bits)
        if bits.shape != (pairs(N),):
            raise ValueError(f"expected {pairs(N)} edge bits")
        return cls(N, np.packbits(bits.astype(bool)))

    @classmethod
    def complete(cls, N: int) -> "EdgeSample":
        return cls.from_bits(N, np.ones(pairs(N), dtype=np.uint8))

    @classmethod
    def empty(cls, N: int) -> "EdgeSample":
        return cls.from_bits(N, np.zeros(pairs(N), dtype=np.uint8))

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=pairs(self.N))

    def edge(self, i: int, j: int) -> int:
        k = edge_index(self.N, i, j)
        return int((self.packed[k >> 3] >> (7 - (k & 7))) & 1)

    def with_edge(self, i: int, j: int, value: int) -> "EdgeSample":
        b = self.bits()
        b[edge_index(self.N, i, j)] = 1 if value else 0
        return EdgeSample.from_bits(self.N, b)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.N, self.N), dtype=np.uint8)
        iu = np.triu_indices(self.N, k=1)
        A[iu] = self.bits()
        return A | A.T

    def edge_count(self) -> int:
        return int(self.bits().sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeSample) and self.N == other.N and np.array_equal(self.packed, other.packed)

    __hash__ = None


def sample_gnp(N: int, p: float, rng: RngStream) -> EdgeSample:
    if N < 3:
        raise ValueError("N must be at least 3")
    if not 0 <= p <= 1:
        raise ValueError("p must be a probability")
    return EdgeSample.from_bits(N, rng.uniform(pairs(N)) < p)


def _codegree_matrix(A: np.ndarray) -> np.ndarray:
    # float matmul is exact here: entries stay below N <= 2^53
    Af = A.astype(np.float64)
    return Af @ Af


def count_triangles(g: EdgeSample) -> int:
    """Sum over edges of the common-neighbour count, divided by 3."""
    A = g.adjacency()
    C = _codegree_matrix(A)
    return int(round(float(np.sum(C * A)) / 6.0))


def count_triangles_bruteforce(g: EdgeSample) -> int:
    if g.N > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX}")
    A = g.adjacency()
    return sum(1 for a, b, c in itertools.combinations(range(g.N), 3) if A[a, b] and A[b, c] and A[a, c])


def codegree(g: EdgeSample, i: int, j: int) -> int:
    """Number of vertices adjacent to both i and j."""
    if i == j:
        raise ValueError("codegree needs two distinct vertices")
    A = g.adjacency()
    return int(np.sum(A[i] & A[j]))


def triangle_function(N: int) -> FunctionUnderTest:
    """Triangle count as a statistic of the C(N, 2) edge bits, with the codegree fast path."""

    def evaluate(s: Sample) -> float:
        return float(count_triangles(EdgeSample.from_bits(N, s.elements)))

    iu = np.triu_indices(N, k=1)

    def replacement_delta(s: Sample, k: int, z) -> float:
        g = EdgeSample.from_bits(N, s.elements)
        return (float(z) - float(s.elements[k])) * codegree(g, int(iu[0][k]), int(iu[1][k]))

    return FunctionUnderTest(evaluate, replacement_delta=replacement_delta, exchangeable=False,
                             name=f"triangles(N={N})")


def expected_triangles(N: int, p: float) -> float:
    return math.comb(N, 3) * p ** 3


def default_p(N: int) -> float:
    return N ** -0.75


def default_lambda(N: int) -> float:
    return N ** (1.0 / 13.0)


def entropy_delta(N: int, p: float, lam: float) -> float:
    """2 p N exp(-N D(lam / N || p^2)); needs p^2 < lam / N < 1."""
    a = lam / N
    if not p * p < a < 1:
        return math.nan
    return 2.0 * p * N * math.exp(-N * relative_entropy(a, p * p))


def specialized_delta(N: int, p: float) -> float:
    """2 p N exp(-N^(1/13))."""
    return 2.0 * p * N * math.exp(-(N ** (1.0 / 13.0)))


@dataclass(frozen=True)
class TriangleProfile:
    N: int
    p: float
    lam: float
    delta: float
    tau: float
    epsilon: float
    delta_entropy: float
    delta_specialized: float
    domain_ok: bool
    claim_condition_met: bool
    flags: tuple = ()

    def sensitivity(self) -> SensitivityProfile:
        return SensitivityProfile(self.lam, self.delta, self.tau)


# exponents of p = N^-3/4 squared and of lam / N = N^(1/13 - 1), as N^-c and N^-b
_B, _C = 12.0 / 13.0, 1.5


def claim_threshold(b: float = _B, c: float = _C) -> float:
    return max(2.0 ** (1.0 / b), 2.0 ** (8.0 / (c - b)))


def triangle_profile(N: int, p: Optional[float] = None, lam: Optional[float] = None,
                     epsilon: Optional[float] = None, epsilon_constant: float = 1.0) -> TriangleProfile:
    """Parameters for the triangle count; defaults p = N^-3/4, lam = N^(1/13), tau = 2 p lam.

    Delta is the entropy form 2 p N exp(-N D(lam/N || p^2)); the N^(1/13)
    specialisation is reported alongside.  eps defaults to
    epsilon_constant * sqrt(lam / (n p)) with n = C(N, 2).
    """
    if N < 3:
        raise ValueError("N must be at least 3")
    p = default_p(N) if p is None else float(p)
    lam = default_lambda(N) if lam is None else float(lam)
    flags = []
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if lam < 1:
        flags.append("lam < 1")
    if p > 0.5:
        flags.append("p > 1/2: tau = 2 p lam exceeds lam")
    d_ent = entropy_delta(N, p, lam)
    domain_ok = math.isfinite(d_ent)
    if not domain_ok:
        flags.append("entropy form needs p^2 < lam/N < 1")
    n = pairs(N)
    eps = epsilon_constant * math.sqrt(lam / (n * p)) if epsilon is None else float(epsilon)
    cond = N >= claim_threshold()
    if not cond:
        flags.append(f"N below {claim_threshold():.4g}, where the displayed chain starts to hold")
    return TriangleProfile(N, p, lam, d_ent, 2.0 * p * lam, eps, d_ent, specialized_delta(N, p),
                           domain_ok and lam >= 1 and p <= 0.5, cond, tuple(flags))


def delta_chain(N: int, p: Optional[float] = None, lam: Optional[float] = None) -> dict:
    """The displayed chain for the triangle Delta, each term an upper bound on the previous.

    exact:     2 p (1 - p) E[1{X > lam} X] with X ~ Binomial(N - 2, p^2)
    markov:    2 p N Pr[X >= lam]
    entropy:   2 p N exp(-N D(lam/N || p^2))
    specialized: 2 p N exp(-N^(1/13))  (only an upper bound for the default lam)
    """
    p = default_p(N) if p is None else p
    lam = default_lambda(N) if lam is None else lam
    q = p * p
    m = N - 2
    k = math.floor(lam) + 1  # smallest integer strictly above lam
    # E[X 1{X >= k}] = m q Pr[Binomial(m - 1, q) >= k - 1]
    tail_mean = m * q * float(stats.binom.sf(k - 2, m - 1, q))
    exact = 2.0 * p * (1 - p) * tail_mean
    markov = 2.0 * p * N * float(stats.binom.sf(math.ceil(lam) - 1, m, q))
    return {
        "exact": exact,
        "markov": markov,
        "entropy": entropy_delta(N, p, lam),
        "specialized": specialized_delta(N, p),
    }


def kimvu_reference(N: int, p: float) -> tuple[float, float]:
    """(exp(-p^2 N^2 log(1/p)), exp(-p^2 N^2)), the lower and upper rate with constant 1."""
    x = p * p * N * N
    return math.exp(-x * math.log(1.0 / p)), math.exp(-x)


def triangle_tail_bound(N: int, p: float, t: float, lam_grid: Optional[Sequence[float]] = None) -> ScenarioBound:
    """Numeric two-sided bound at deviation t, minimised over lam in (p^2 N, N) and eps."""
    if lam_grid is None:
        lam_grid = np.geomspace(max(1.0, 1.0001 * p * p * N), 0.999 * N, 80)

    def profile_for(lam: float):
        d = entropy_delta(N, p, lam)
        if not math.isfinite(d) or lam < 1 or 2 * p * lam > lam:
            return None
        return SensitivityProfile(lam, d, 2.0 * p * lam)

    return best_bound_over_lambda(profile_for, pairs(N), t, lam_grid)


@dataclass(frozen=True)
class TriangleReport:
    N: int
    p: float
    lam: float
    trials: int
    expected: float
    empirical_mean: MonteCarloEstimate
    tails: dict
    bounds: dict
    codegree_tail: MonteCarloEstimate
    codegree_bound: float
    kimvu: tuple
    codegree_mean: MonteCarloEstimate = field(default=None)


def triangle_experiment(N: int, trials: int, rng: RngStream, p: Optional[float] = None,
                        alphas: Sequence[float] = ALPHAS, max_vertices: int = MAX_VERTICES) -> TriangleReport:
    """Monte Carlo over G(N, p) graphs; graph k uses ``rng.split(k)``.

    Tails are two-sided, Pr[|count - C(N,3) p^3| >= alpha C(N,3) p^3].  The
    codegree tail pools all vertex pairs of every graph, so its standard
    error treats pairs as independent (they are only pairwise weakly
    dependent).
    """
    if N > max_vertices:
        raise ValueError(f"N={N} exceeds the memory cap of {max_vertices} vertices")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    p = default_p(N) if p is None else p
    lam = default_lambda(N)
    mu = expected_triangles(N, p)
    counts = np.empty(trials)
    co_hits = np.empty(trials)
    co_means = np.empty(trials)
    iu = np.triu_indices(N, k=1)
    for k in range(trials):
        g = sample_gnp(N, p, rng.split(k))
        A = g.adjacency()
        C = _codegree_matrix(A)
        counts[k] = round(float(np.sum(C * A)) / 6.0)
        cod = C[iu]
        co_hits[k] = np.mean(cod >= lam)
        co_means[k] = np.mean(cod)
    dev = np.abs(counts - mu)
    tails = {a: MonteCarloEstimate.from_values(dev >= a * mu) for a in alphas}
    bounds = {a: triangle_tail_bound(N, p, a * mu) for a in alphas}
    m = N - 2
    co_bound = binomial_tail_entropy_bound(m, p * p, lam) if p * p < lam / m < 1 else 1.0
    hits = MonteCarloEstimate.from_values(co_hits)
    # per-pair standard error: pairs pooled across graphs
    n_obs = trials * pairs(N)
    se = math.sqrt(max(hits.mean * (1 - hits.mean), 0.0) / n_obs)
    co_tail = MonteCarloEstimate(hits.mean, max(se, hits.std_error), n_obs, hits.mean - 1.96 * se,
                                 hits.mean + 1.96 * se, note="pooled over vertex pairs")
    return TriangleReport(N, p, lam, trials, mu, MonteCarloEstimate.from_values(counts), tails, bounds,
                          co_tail, co_bound, kimvu_reference(N, p), MonteCarloEstimate.from_values(co_means))
