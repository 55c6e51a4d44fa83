"""Between-study variance estimators for random-effects meta-analysis."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError


def tau2_estimate(effects, variances, method: str = "DL") -> float:
    """Estimate the between-study heterogeneity variance.

    ``DL``: the moment estimator max(0, (Q - df) / C) with Cochran's Q under
    inverse-variance weights. ``SJ``: the Sidik-Jonkman (2005) two-step
    estimator, which starts from the crude variance of the effects and
    reweights once; it is inherently non-negative.
    """
    y = np.asarray(effects, dtype=float)
    v = np.asarray(variances, dtype=float)
    if y.size != v.size:
        raise ConfigError("effects and variances must have equal length")
    if y.size < 2:
        raise ConfigError("need at least 2 studies")
    if np.any(v <= 0):
        raise ConfigError("within-study variances must be > 0")

    if method == "DL":
        w = 1.0 / v
        mu = (w * y).sum() / w.sum()
        q = (w * (y - mu) ** 2).sum()
        c = w.sum() - (w**2).sum() / w.sum()
        return float(max(0.0, (q - (y.size - 1)) / c))

    if method == "SJ":
        tau2_0 = float(((y - y.mean()) ** 2).sum() / y.size)
        if tau2_0 == 0.0:
            return 0.0
        w = 1.0 / (v / tau2_0 + 1.0)
        mu = (w * y).sum() / w.sum()
        return float((w * (y - mu) ** 2).sum() / (y.size - 1))

    raise ConfigError(f"unknown tau^2 method {method!r}")
