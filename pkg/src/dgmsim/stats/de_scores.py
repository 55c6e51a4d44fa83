"""Per-gene differential-expression scorers.

These are simple in-repo scorers (moderated pipelines are out of scope);
both return one non-negative score per gene where larger means more
evidence of differential expression, suitable for ranking into an AUC.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import ConfigError

DE_SCORE_METHODS = ("log-t", "rank-sum")


def de_gene_scores(counts, groups, method: str = "log-t"):
    """Score every gene for a two-group difference.

    ``log-t``: |Welch t| on log2(count + 1); genes with zero variance in
    both groups score 0 (counted in the returned diagnostics).
    ``rank-sum``: |z| of the tie-corrected Wilcoxon statistic per gene.

    Returns (scores, diagnostics).
    """
    counts = np.asarray(counts, dtype=float)
    groups = np.asarray(groups)
    if counts.ndim != 2 or counts.shape[0] != groups.size:
        raise ConfigError("counts must be n_obs x n_genes aligned with groups")
    labels = np.unique(groups)
    if labels.size != 2:
        raise ConfigError(f"expected exactly 2 groups, got {labels.size}")
    mask1 = groups == labels[0]
    mask2 = ~mask1
    if method == "log-t":
        return _log_t_scores(counts, mask1, mask2)
    if method == "rank-sum":
        return _rank_sum_scores(counts, mask1, mask2)
    raise ConfigError(f"unknown DE score method {method!r}")


def _log_t_scores(counts, mask1, mask2):
    logged = np.log2(counts + 1.0)
    a, b = logged[mask1], logged[mask2]
    n1, n2 = a.shape[0], b.shape[0]
    mean_diff = a.mean(axis=0) - b.mean(axis=0)
    se2 = a.var(axis=0, ddof=1) / n1 + b.var(axis=0, ddof=1) / n2
    zero_var = se2 == 0
    scores = np.zeros(counts.shape[1])
    ok = ~zero_var
    scores[ok] = np.abs(mean_diff[ok]) / np.sqrt(se2[ok])
    return scores, {"zero_variance_genes": int(zero_var.sum())}


def _rank_sum_scores(counts, mask1, mask2):
    n1 = int(mask1.sum())
    n2 = int(mask2.sum())
    n = n1 + n2
    ranks = rankdata(counts, method="average", axis=0)
    u = ranks[mask1].sum(axis=0) - n1 * (n1 + 1) / 2.0
    tie_terms = np.empty(counts.shape[1])
    for j in range(counts.shape[1]):
        _, reps = np.unique(counts[:, j], return_counts=True)
        tie_terms[j] = (reps.astype(float) ** 3 - reps).sum()
    variance = (n1 * n2 / 12.0) * (n + 1 - tie_terms / (n * (n - 1)))
    diff = u - n1 * n2 / 2.0
    scores = np.zeros(counts.shape[1])
    ok = variance > 0
    adj = np.abs(diff[ok]) - 0.5
    scores[ok] = np.maximum(adj, 0.0) / np.sqrt(variance[ok])
    return scores, {"zero_variance_genes": int((~ok).sum())}
