"""Fairness-aware regression toolkit.

Measures and optimizes the divergence in relevance-weighted error across
intersectional groups of protected attributes: relevance functions, exact
per-group error curves, fairness metrics, second-order boosting objectives,
a from-scratch tree ensemble, a dual-ensemble model, curve approximation,
and an experiment harness.
"""

__version__ = "0.1.0"

from . import approx, config, curves, dataset, gbt, harness, idboost, losses, metrics, relevance
from .errors import InterdivError

__all__ = [
    "__version__",
    "InterdivError",
    "approx",
    "config",
    "curves",
    "dataset",
    "gbt",
    "harness",
    "idboost",
    "losses",
    "metrics",
    "relevance",
]
