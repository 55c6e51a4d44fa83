"""Two-arm trial with an ordinal outcome drawn from per-group multinomials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

#: Published probability tables are rounded; a tuple is accepted for
#: renormalization when its sum is within this distance of 1.
SUM_TOLERANCE = 0.03


def normalize_probs(probs) -> tuple[float, ...]:
    """Validate a probability tuple and rescale it to sum exactly to 1."""
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ConfigError("probability tuple must be 1-D with at least 2 entries")
    if np.any(arr < 0):
        raise ConfigError(f"negative probability entry in {probs!r}")
    total = arr.sum()
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ConfigError(
            f"probabilities sum to {total:.4f}, more than {SUM_TOLERANCE} away from 1"
        )
    return tuple(arr / total)


@dataclass(frozen=True)
class OrdinalTwoArmConfig:
    """Equal-sized groups; outcome category drawn iid from the group's tuple."""

    n_obs: int
    n_categories: int
    pi1: tuple[float, ...]
    pi2: tuple[float, ...]

    def __post_init__(self):
        if self.n_obs < 2 or self.n_obs % 2 != 0:
            raise ConfigError(f"n_obs must be even and >= 2, got {self.n_obs}")
        if self.n_categories < 2:
            raise ConfigError(f"n_categories must be >= 2, got {self.n_categories}")
        object.__setattr__(self, "pi1", normalize_probs(self.pi1))
        object.__setattr__(self, "pi2", normalize_probs(self.pi2))
        for name, probs in (("pi1", self.pi1), ("pi2", self.pi2)):
            if len(probs) != self.n_categories:
                raise ConfigError(
                    f"{name} has {len(probs)} entries for {self.n_categories} categories"
                )


def sample_ordinal(config: OrdinalTwoArmConfig, rng: np.random.Generator):
    """Draw one dataset: outcome ``y`` in 1..K and group label ``x`` in {1, 2}.

    Group 1 occupies the first ``n_obs/2`` rows, group 2 the rest.
    """
    half = config.n_obs // 2
    k = config.n_categories
    y1 = rng.choice(k, size=half, p=config.pi1) + 1
    y2 = rng.choice(k, size=half, p=config.pi2) + 1
    y = np.concatenate([y1, y2])
    x = np.repeat([1, 2], half)
    return y, x


def tabulate_ordinal(y: np.ndarray, x: np.ndarray, n_categories: int) -> np.ndarray:
    """Cross-tabulate outcomes into a 2 x K count table."""
    counts = np.zeros((2, n_categories), dtype=np.int64)
    for g in (1, 2):
        vals = y[x == g]
        counts[g - 1] = np.bincount(vals - 1, minlength=n_categories)[:n_categories]
    return counts


def estimate_ordinal_probs(counts) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-group category proportions (the ML estimate) from a 2 x K table."""
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2 or counts.shape[0] != 2:
        raise ConfigError(f"expected a 2 x K table, got shape {counts.shape}")
    row_sums = counts.sum(axis=1)
    if np.any(row_sums <= 0):
        raise ConfigError("a group has zero total count")
    props = counts / row_sums[:, None]
    return tuple(props[0]), tuple(props[1])


def relative_effect(pi1, pi2) -> tuple[float, float]:
    """P(Y1 > Y2) + P(Y1 = Y2)/2 for independent outcomes, plus |p - 0.5|.

    Computed antisymmetrically as 0.5 + (P(Y1 > Y2) - P(Y1 < Y2))/2 so that
    identical tuples give exactly 0.5 and swapping the groups gives exactly
    the complement.
    """
    a1 = np.asarray(pi1, dtype=float)
    a2 = np.asarray(pi2, dtype=float)
    if a1.shape != a2.shape:
        raise ConfigError(f"length mismatch: {a1.shape} vs {a2.shape}")
    greater = 0.0
    less = 0.0
    k = a1.size
    for i in range(k):
        for j in range(k):
            if i > j:
                greater += a1[i] * a2[j]
                less += a2[i] * a1[j]
    p = float(0.5 + 0.5 * (greater - less))
    return p, abs(p - 0.5)
