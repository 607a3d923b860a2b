"""Concentration bounds for low-sensitivity-in-expectation functions, via differential privacy."""

from .bounds import SensitivityProfile, TailBound, high_prob_bound, mcdiarmid_bound, optimize_epsilon
from .core import DomainDistribution, FunctionUnderTest, MultiSample, RngStream, Sample, sample_sum

__all__ = [
    "DomainDistribution",
    "FunctionUnderTest",
    "MultiSample",
    "RngStream",
    "Sample",
    "SensitivityProfile",
    "TailBound",
    "high_prob_bound",
    "mcdiarmid_bound",
    "optimize_epsilon",
    "sample_sum",
]
