"""Two-level meta-analysis generator: per-study data reduced to Hedges' g."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class MetaAnalysisConfig:
    """True study effects N(effect_mean, between_var); outcomes normal within study.

    Study sizes are drawn from Unif(size_min, size_max), rounded to the
    nearest even integer >= 4, and split evenly between the two groups.
    """

    n_study: int
    effect_mean: float
    between_var: float
    size_min: float
    size_max: float
    group1_means: tuple[float, ...]
    within_var: float

    def __post_init__(self):
        if self.n_study < 1:
            raise ConfigError("n_study must be >= 1")
        if self.between_var < 0:
            raise ConfigError("between-study variance must be >= 0")
        if self.within_var <= 0:
            raise ConfigError("within-group variance must be > 0")
        if not (4 <= self.size_min <= self.size_max):
            raise ConfigError("need 4 <= size_min <= size_max")
        object.__setattr__(self, "group1_means", tuple(float(m) for m in self.group1_means))
        if len(self.group1_means) != self.n_study:
            raise ConfigError(
                f"group1_means has {len(self.group1_means)} entries for "
                f"{self.n_study} studies"
            )


def hedges_g(group1: np.ndarray, group2: np.ndarray) -> tuple[float, float]:
    """Bias-corrected standardized mean difference (group2 - group1) and variance.

    Uses the small-sample correction J(m) = 1 - 3/(4m - 1) with
    m = n1 + n2 - 2; the variance is
    J^2 * ((n1 + n2)/(n1*n2) + g^2 / (2*(n1 + n2 - 2))).
    """
    n1, n2 = len(group1), len(group2)
    if n1 < 2 or n2 < 2:
        raise ConfigError("each group needs at least 2 observations")
    m = n1 + n2 - 2
    pooled_var = ((n1 - 1) * np.var(group1, ddof=1) + (n2 - 1) * np.var(group2, ddof=1)) / m
    if pooled_var <= 0:
        raise ConfigError("pooled variance is zero")
    d = (np.mean(group2) - np.mean(group1)) / np.sqrt(pooled_var)
    correction = 1.0 - 3.0 / (4.0 * m - 1.0)
    g = correction * d
    var_g = correction**2 * ((n1 + n2) / (n1 * n2) + g**2 / (2.0 * m))
    return float(g), float(var_g)


def _even_size(raw: float) -> int:
    size = int(round(raw / 2.0)) * 2
    return max(size, 4)


def sample_meta(config: MetaAnalysisConfig, rng: np.random.Generator):
    """Draw one meta-analysis dataset: per-study (g_hat, var_hat) pairs."""
    effects = np.empty(config.n_study)
    variances = np.empty(config.n_study)
    for i in range(config.n_study):
        theta_i = rng.normal(config.effect_mean, np.sqrt(config.between_var))
        size = _even_size(rng.uniform(config.size_min, config.size_max))
        half = size // 2
        mu1 = config.group1_means[i]
        group1 = rng.normal(mu1, np.sqrt(config.within_var), size=half)
        group2 = rng.normal(mu1 + theta_i, np.sqrt(config.within_var), size=half)
        effects[i], variances[i] = hedges_g(group1, group2)
    return effects, variances
