"""Distributions, samples, statistics under test and the shared random stream.

Randomness contract
-------------------
Every random draw in the package comes from an :class:`RngStream`, a thin
wrapper over numpy's Philox4x64-10 counter-based generator.  A stream is
identified by ``(seed, path)``: the seed becomes the low 64 bits of the Philox
key, the first path element the high 64 bits, and the next three path elements
occupy counter words 1-3.  Distinct paths therefore address disjoint regions of
the Philox counter space, so child streams cannot overlap (as long as a single
stream draws fewer than 2**64 blocks).  Only ``Generator.random`` (uniform
doubles) and raw 64-bit words are consumed, and every distribution is obtained
from them by an explicit inverse-CDF transform, which keeps outputs
bit-identical across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

MAX_SPLIT_DEPTH = 4
_U64 = (1 << 64) - 1


class RngStream:
    """Deterministic, splittable random stream."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed <= _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if len(path) > MAX_SPLIT_DEPTH:
            raise ValueError(f"split depth exceeds {MAX_SPLIT_DEPTH}")
        self.seed = seed
        self.path = tuple(int(k) for k in path)
        # slot value 0 means "unused", so child k is stored as k + 1
        slots = [k + 1 for k in self.path] + [0] * (MAX_SPLIT_DEPTH - len(self.path))
        key = seed | (slots[0] << 64)
        counter = np.array([0, slots[1], slots[2], slots[3]], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key, counter=counter)
        self.generator = np.random.Generator(self._bitgen)

    def split(self, k: int) -> "RngStream":
        if not 0 <= k < _U64:
            raise ValueError(f"split index must lie in [0, 2**64 - 1), got {k}")
        return RngStream(self.seed, self.path + (k,))

    def uniform(self, size=None) -> np.ndarray | float:
        """Uniform draws on [0, 1)."""
        return self.generator.random(size)

    def uniform_open_closed(self, size=None) -> np.ndarray | float:
        """Uniform draws on (0, 1]."""
        return 1.0 - self.generator.random(size)

    def raw_bits(self, nbits: int) -> np.ndarray:
        """``nbits`` fair coin flips as a uint8 array of 0/1."""
        words = self._bitgen.random_raw(-(-nbits // 64))
        bits = np.unpackbits(np.asarray(words, dtype="<u8").view(np.uint8), bitorder="little")
        return bits[:nbits]

    def integers(self, high: int, size=None):
        """Uniform integers in ``[0, high)`` via floor(u * high)."""
        u = self.generator.random(size)
        out = np.minimum(np.floor(u * high), high - 1).astype(np.int64)
        return int(out) if size is None else out

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


def as_stream(rng: RngStream | int) -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))


class Kind(str, Enum):
    RADEMACHER = "rademacher"
    BERNOULLI = "bernoulli"
    SYMMETRIC_PARETO = "symmetric_pareto"
    HYPERCUBE_ROW = "hypercube_row"


@dataclass(frozen=True)
class DomainDistribution:
    kind: Kind
    p: float = 0.5
    min: float = 1.0
    exponent: float = 2.0
    d: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.BERNOULLI and not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli p must lie in [0, 1], got {self.p}")
        if self.kind is Kind.SYMMETRIC_PARETO:
            if not self.min > 0:
                raise ValueError(f"Pareto min must be positive, got {self.min}")
            if not self.exponent > 1:
                raise ValueError(f"Pareto exponent must exceed 1, got {self.exponent}")
        if self.kind is Kind.HYPERCUBE_ROW and (int(self.d) != self.d or self.d < 1):
            raise ValueError(f"hypercube dimension must be a positive integer, got {self.d}")

    @classmethod
    def rademacher(cls) -> "DomainDistribution":
        return cls(Kind.RADEMACHER)

    @classmethod
    def bernoulli(cls, p: float) -> "DomainDistribution":
        return cls(Kind.BERNOULLI, p=p)

    @classmethod
    def symmetric_pareto(cls, min: float = 1.0, exponent: float = 2.0) -> "DomainDistribution":
        return cls(Kind.SYMMETRIC_PARETO, min=min, exponent=exponent)

    @classmethod
    def hypercube_row(cls, d: int) -> "DomainDistribution":
        return cls(Kind.HYPERCUBE_ROW, d=int(d))

    @property
    def element_shape(self) -> tuple[int, ...]:
        return (self.d,) if self.kind is Kind.HYPERCUBE_ROW else ()

    @property
    def mean(self) -> float:
        return self.p if self.kind is Kind.BERNOULLI else 0.0

    def abs_mean(self) -> float:
        """E|x| for scalar kinds."""
        if self.kind is Kind.RADEMACHER:
            return 1.0
        if self.kind is Kind.BERNOULLI:
            return self.p
        if self.kind is Kind.SYMMETRIC_PARETO:
            return self.min * self.exponent / (self.exponent - 1.0)
        raise ValueError("abs_mean is defined for scalar distributions only")

    def draw(self, rng: RngStream, size: int | tuple[int, ...] = ()) -> np.ndarray:
        """Array of i.i.d. elements with shape ``size + element_shape``."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        full = shape + self.element_shape
        count = math.prod(full)
        if self.kind in (Kind.RADEMACHER, Kind.HYPERCUBE_ROW):
            bits = rng.raw_bits(count).astype(np.int64)
            return (2 * bits - 1).reshape(full)
        if self.kind is Kind.BERNOULLI:
            u = rng.uniform(count)
            return (u < self.p).astype(np.int64).reshape(full)
        # inverse CDF: |x| = min * u^(-1/exponent) with u on (0, 1]; sign from a second uniform
        u = rng.uniform_open_closed(count)
        sign = np.where(rng.uniform(count) < 0.5, -1.0, 1.0)
        return (sign * self.min * u ** (-1.0 / self.exponent)).reshape(full)


def sample(dist: DomainDistribution, rng: RngStream):
    x = dist.draw(rng, 1)[0]
    return x if dist.element_shape else x.item()


@dataclass(frozen=True, eq=False)
class Sample:
    """A size-n database; ``elements`` has shape (n,) or (n, d)."""

    elements: np.ndarray

    def __post_init__(self):
        arr = np.array(self.elements)
        if arr.ndim == 0 or arr.shape[0] < 1:
            raise ValueError("a sample needs at least one element")
        arr.setflags(write=False)
        object.__setattr__(self, "elements", arr)

    @property
    def n(self) -> int:
        return self.elements.shape[0]

    def replace(self, i: int, z) -> "Sample":
        if not 0 <= i < self.n:
            raise IndexError(f"index {i} out of range for n={self.n}")
        arr = self.elements.copy()
        arr = arr.astype(np.result_type(arr, np.asarray(z)))
        arr[i] = z
        return Sample(arr)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, Sample) and np.array_equal(self.elements, other.elements)

    __hash__ = None


@dataclass(frozen=True)
class FunctionUnderTest:
    """A real statistic of a sample, optionally with a fast replacement path."""

    evaluate: Callable[[Sample], float]
    declared_sensitivity: Optional[float] = None
    replacement_delta: Optional[Callable[[Sample, int, object], float]] = None
    exchangeable: bool = False
    name: str = "f"
    batch_evaluate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, s: Sample) -> float:
        return float(self.evaluate(s))

    def delta(self, s: Sample, i: int, z) -> float:
        """f(S with position i replaced by z) - f(S)."""
        if self.replacement_delta is not None:
            return float(self.replacement_delta(s, i, z))
        return float(self.evaluate(s.replace(i, z))) - float(self.evaluate(s))


def sample_sum(declared_sensitivity: Optional[float] = None) -> FunctionUnderTest:
    return FunctionUnderTest(
        evaluate=lambda s: float(np.sum(s.elements)),
        declared_sensitivity=declared_sensitivity,
        replacement_delta=lambda s, i, z: float(z) - float(s.elements[i]),
        exchangeable=True,
        name="sample_sum",
        batch_evaluate=lambda block: block.reshape(block.shape[0], -1).sum(axis=1).astype(float),
    )


def constant(c: float) -> FunctionUnderTest:
    return FunctionUnderTest(
        evaluate=lambda s: float(c),
        declared_sensitivity=0.0,
        replacement_delta=lambda s, i, z: 0.0,
        exchangeable=True,
        name=f"constant({c})",
        batch_evaluate=lambda block: np.full(block.shape[0], float(c)),
    )


@dataclass(frozen=True)
class MultiSample:
    """T databases of equal size n."""

    subsamples: tuple[Sample, ...]

    def __post_init__(self):
        subs = tuple(s if isinstance(s, Sample) else Sample(s) for s in self.subsamples)
        if not subs:
            raise ValueError("a multi-sample needs at least one subsample")
        if len({s.n for s in subs}) != 1:
            raise ValueError("all subsamples must share the same n")
        object.__setattr__(self, "subsamples", subs)

    @property
    def T(self) -> int:
        return len(self.subsamples)

    @property
    def n(self) -> int:
        return self.subsamples[0].n

    def values(self, f: FunctionUnderTest) -> np.ndarray:
        return np.array([f(s) for s in self.subsamples], dtype=float)

    def with_subsample(self, t: int, s: Sample) -> "MultiSample":
        subs = list(self.subsamples)
        subs[t] = s
        return MultiSample(tuple(subs))

    def is_f_lambda_neighbor(self, other: "MultiSample", f: FunctionUnderTest, lam: float) -> bool:
        if self.T != other.T:
            return False
        return bool(np.all(np.abs(self.values(f) - other.values(f)) <= lam))

    def __getitem__(self, t: int) -> Sample:
        return self.subsamples[t]

    def __len__(self) -> int:
        return self.T


def sample_database(dist: DomainDistribution, n: int, rng: RngStream) -> Sample:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Sample(dist.draw(rng, n))


def sample_multidatabase(dist: DomainDistribution, n: int, T: int, rng: RngStream) -> MultiSample:
    if n < 1 or T < 1:
        raise ValueError(f"n and T must be >= 1, got n={n}, T={T}")
    block = dist.draw(rng, (T, n))
    return MultiSample(tuple(Sample(block[t]) for t in range(T)))


def check_replacement_delta(
    f: FunctionUnderTest,
    dist: DomainDistribution,
    n: int,
    rng: RngStream,
    instances: int = 1000,
    rtol: float = 1e-12,
) -> float:
    """Largest relative disagreement between ``replacement_delta`` and re-evaluation."""
    if f.replacement_delta is None:
        raise ValueError("function has no replacement_delta fast path")
    worst = 0.0
    for k in range(instances):
        r = rng.split(k)
        s = sample_database(dist, n, r)
        i = r.integers(n)
        z = sample(dist, r)
        slow = float(f.evaluate(s.replace(i, z))) - float(f.evaluate(s))
        fast = float(f.replacement_delta(s, i, z))
        scale = max(abs(slow), abs(fast), 1.0)
        worst = max(worst, abs(slow - fast) / scale)
    return worst


def stack(samples: Sequence[Sample]) -> np.ndarray:
    return np.stack([s.elements for s in samples])
