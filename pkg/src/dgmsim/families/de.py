"""Negative-binomial RNA-Seq count generator for two-group DE studies.

Counts follow NB(mean, dispersion) with variance = mean + dispersion * mean^2
(the RNA-Seq convention); dispersion 0 degenerates to Poisson. Group 1 means
are shifted by per-gene fold changes; per-gene mean/dispersion pairs come
from an expression parameter pool, redrawn for every repetition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class DEConfig:
    """One fully specified count-matrix generator."""

    n_obs: int
    n_genes: int
    p_de: float
    p_up: float
    min_fc: float
    fc_rate: float
    means: tuple[float, ...]
    dispersions: tuple[float, ...]

    def __post_init__(self):
        if self.n_obs < 2 or self.n_obs % 2 != 0:
            raise ConfigError(f"n_obs must be even and >= 2, got {self.n_obs}")
        if self.n_genes < 1:
            raise ConfigError("n_genes must be >= 1")
        if not 0.0 <= self.p_de <= 1.0:
            raise ConfigError(f"p_de must be in [0, 1], got {self.p_de}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ConfigError(f"p_up must be in [0, 1], got {self.p_up}")
        if self.min_fc <= 1.0:
            raise ConfigError(f"min_fc must exceed 1, got {self.min_fc}")
        if self.fc_rate <= 0.0:
            raise ConfigError("fc_rate must be strictly positive")
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(
            self, "dispersions", tuple(float(p) for p in self.dispersions)
        )
        if len(self.means) != self.n_genes or len(self.dispersions) != self.n_genes:
            raise ConfigError("means/dispersions must have length n_genes")
        if any(m < 0 for m in self.means) or any(p < 0 for p in self.dispersions):
            raise ConfigError("means and dispersions must be >= 0")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def assign_fold_changes(config: DEConfig, rng: np.random.Generator):
    """Assign per-gene fold changes and DE labels.

    Exactly round(p_de * G) genes are differentially expressed, chosen
    uniformly without replacement; of those, round(p_up * n_de) are
    upregulated with FC = min_fc + E where E ~ Exp(fc_rate), and the rest
    are downregulated with the reciprocal. Non-DE genes keep FC = 1.
    Draw order (DE indices, then the exponential shifts) is fixed.
    """
    g = config.n_genes
    n_de = _round_half_up(config.p_de * g)
    n_up = _round_half_up(config.p_up * n_de)
    fc = np.ones(g)
    labels = np.zeros(g, dtype=bool)
    if n_de > 0:
        de_idx = rng.choice(g, size=n_de, replace=False)
        labels[de_idx] = True
        shifts = config.min_fc + rng.exponential(scale=1.0 / config.fc_rate, size=n_de)
        up = np.zeros(n_de, dtype=bool)
        up[:n_up] = True
        fc[de_idx[up]] = shifts[up]
        fc[de_idx[~up]] = 1.0 / shifts[~up]
    return fc, labels


def _nb_draw(rng: np.random.Generator, means: np.ndarray, dispersions: np.ndarray,
             n_rows: int) -> np.ndarray:
    """Gamma-Poisson draws, n_rows x len(means); dispersion 0 rows are Poisson."""
    g = means.size
    lam = np.broadcast_to(means, (n_rows, g)).copy()
    over = dispersions > 0
    if np.any(over):
        shape = 1.0 / dispersions[over]
        scale = dispersions[over] * means[over]
        lam[:, over] = rng.gamma(
            np.broadcast_to(shape, (n_rows, over.sum())),
            np.broadcast_to(scale, (n_rows, over.sum())),
        )
    return rng.poisson(lam)


def sample_counts(config: DEConfig, fc: np.ndarray, rng: np.random.Generator):
    """Draw one count matrix (n_obs x n_genes) plus group labels.

    Group 1 genes have mean mean * FC, group 2 uses the baseline mean.
    """
    fc = np.asarray(fc, dtype=float)
    if fc.shape != (config.n_genes,):
        raise ConfigError(f"fold-change vector has shape {fc.shape}")
    means = np.asarray(config.means)
    dispersions = np.asarray(config.dispersions)
    group1_means = means * fc
    assert np.all(group1_means >= 0)
    half = config.n_obs // 2
    counts1 = _nb_draw(rng, group1_means, dispersions, half)
    counts2 = _nb_draw(rng, means, dispersions, half)
    counts = np.vstack([counts1, counts2])
    groups = np.repeat([1, 2], half)
    return counts, groups


# --------------------------------------------------------------------------- #
# Expression parameter pools
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ExpressionPool:
    """Per-gene mean/dispersion estimates surviving the mean floor."""

    dataset_id: str
    means: np.ndarray
    dispersions: np.ndarray
    median_dispersion: float
    n_total: int

    @property
    def n_kept(self) -> int:
        return self.means.size


def load_expression_pool(path, mean_floor: float = 10.0,
                         dataset_id: str | None = None) -> ExpressionPool:
    """Read a gene_id/mean/dispersion CSV and apply the mean floor.

    The median dispersion summary is computed over the surviving genes only.
    """
    path = Path(path)
    means, dispersions = [], []
    n_total = 0
    with path.open() as fh:
        reader = csv.DictReader(fh)
        required = {"gene_id", "mean", "dispersion"}
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            n_total += 1
            mean = float(row["mean"])
            if mean < mean_floor:
                continue
            means.append(mean)
            dispersions.append(float(row["dispersion"]))
    if not means:
        raise ConfigError(f"{path}: no genes with mean >= {mean_floor}")
    means = np.asarray(means)
    dispersions = np.asarray(dispersions)
    return ExpressionPool(
        dataset_id=dataset_id or path.stem,
        means=means,
        dispersions=dispersions,
        median_dispersion=float(np.median(dispersions)),
        n_total=n_total,
    )


def draw_expression_params(pool: ExpressionPool, n_genes: int,
                           rng: np.random.Generator):
    """Draw n_genes (mean, dispersion) rows uniformly without replacement."""
    if pool.n_kept < n_genes:
        raise ConfigError(
            f"pool {pool.dataset_id}: {pool.n_kept} genes above the floor, "
            f"need {n_genes}"
        )
    idx = rng.choice(pool.n_kept, size=n_genes, replace=False)
    return pool.means[idx], pool.dispersions[idx]


def load_expression_params(path, n_genes: int, mean_floor: float,
                           rng: np.random.Generator):
    """Filter a parameter file and draw one gene subset.

    Returns (means, dispersions, median_dispersion). The median summarizes
    the whole filtered pool, not the drawn subset; a fresh draw is intended
    for every repetition.
    """
    pool = load_expression_pool(path, mean_floor=mean_floor)
    means, dispersions = draw_expression_params(pool, n_genes, rng)
    return means, dispersions, pool.median_dispersion


class ExpressionLibrary:
    """Lazy cache of expression pools, one CSV per dataset id, in a directory."""

    def __init__(self, directory, mean_floor: float = 10.0):
        self.directory = Path(directory)
        self.mean_floor = mean_floor
        self._pools: dict[str, ExpressionPool] = {}

    def pool(self, dataset_id: str) -> ExpressionPool:
        if dataset_id not in self._pools:
            path = self.directory / f"{dataset_id}.csv"
            if not path.exists():
                raise ConfigError(f"no expression file for {dataset_id!r} at {path}")
            self._pools[dataset_id] = load_expression_pool(
                path, mean_floor=self.mean_floor, dataset_id=dataset_id
            )
        return self._pools[dataset_id]

    def median_dispersion(self, dataset_id: str) -> float:
        return self.pool(dataset_id).median_dispersion
