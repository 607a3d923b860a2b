"""End-to-end concentration scenarios: subgaussian, heavy-tailed Pareto, random-graph triangles."""

from .common import ScenarioBound, best_bound_over_lambda

__all__ = ["ScenarioBound", "best_bound_over_lambda"]
