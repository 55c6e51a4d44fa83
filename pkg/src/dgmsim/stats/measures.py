"""Performance measures: tie-aware AUC, power with Monte Carlo standard error."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from ..errors import ConfigError


def auc_score(scores, labels) -> float:
    """Midrank Mann-Whitney AUC: P(score_pos > score_neg) + P(equal)/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ConfigError("scores and labels must have the same shape")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigError("both label classes must be present")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def power_and_mcse(p_values, alpha: float) -> tuple[float, float, int]:
    """Rejection fraction at level alpha, its MCSE, and the failure count.

    ``p_values`` may contain None for failed repetitions; failures are
    excluded from the denominator and counted separately.
    """
    usable = [p for p in p_values if p is not None]
    n_failures = len(p_values) - len(usable)
    if not usable:
        raise ConfigError("all repetitions failed")
    n = len(usable)
    power = sum(1 for p in usable if p <= alpha) / n
    mcse = math.sqrt(power * (1.0 - power) / n)
    return power, mcse, n_failures
