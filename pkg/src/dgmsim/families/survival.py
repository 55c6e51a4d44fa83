"""Two-arm survival data with uniform right-censoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class SurvivalTwoArmConfig:
    """Event times from a rate-parameterized distribution, censoring Unif(0, u).

    ``rate1``/``rate2`` are per-group event rates. Under ``event_dist ==
    "exponential"`` the survival function is exp(-rate * t). Under
    ``"weibull"`` the event time is scale * W(shape) with scale = 1/rate, so
    shape 1 reduces to the exponential case.
    """

    n_obs: int
    rate1: float
    rate2: float
    censor_upper: float
    event_dist: str = "exponential"
    weibull_shape: float = 1.0

    def __post_init__(self):
        if self.n_obs < 2 or self.n_obs % 2 != 0:
            raise ConfigError(f"n_obs must be even and >= 2, got {self.n_obs}")
        if self.rate1 <= 0 or self.rate2 <= 0:
            raise ConfigError("event rates must be strictly positive")
        if self.censor_upper <= 0:
            raise ConfigError("censoring upper bound must be strictly positive")
        if self.event_dist not in ("exponential", "weibull"):
            raise ConfigError(f"unknown event distribution {self.event_dist!r}")
        if self.event_dist == "weibull" and self.weibull_shape <= 0:
            raise ConfigError("weibull shape must be strictly positive")


def sample_survival(config: SurvivalTwoArmConfig, rng: np.random.Generator):
    """Draw one dataset of (observed time, event indicator, group label).

    Per individual: t from the event distribution, c from Unif(0, u),
    y = min(t, c), d = 1 if the event was observed (t <= c).
    """
    half = config.n_obs // 2
    times = []
    for rate in (config.rate1, config.rate2):
        if config.event_dist == "exponential":
            t = rng.exponential(scale=1.0 / rate, size=half)
        else:
            t = (1.0 / rate) * rng.weibull(config.weibull_shape, size=half)
        times.append(t)
    t = np.concatenate(times)
    c = rng.uniform(0.0, config.censor_upper, size=config.n_obs)
    y = np.minimum(t, c)
    d = (t <= c).astype(np.int64)
    x = np.repeat([1, 2], half)
    return y, d, x


def expected_event_fraction(rate: float, censor_upper: float) -> float:
    """P(event observed) for exponential times and Unif(0, u) censoring.

    Integrating P(T <= c) over c ~ Unif(0, u) gives
    1 - (1 - exp(-rate*u)) / (rate*u).
    """
    ru = rate * censor_upper
    return 1.0 - (1.0 - np.exp(-ru)) / ru
