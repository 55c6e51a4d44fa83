"""The four evaluated two-group tests for ordinal outcome tables.

All tests are label-swap invariant in their two-sided p-values and depend on
the outcome only through ranks/contingency counts, so strictly monotone
relabelings of the categories leave every p-value unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln
from scipy.stats import chi2, norm

from ..errors import ConfigError


@dataclass(frozen=True)
class TestResult:
    """Outcome of one method application: p-value xor failure flag."""

    method: str
    p_value: float | None
    statistic: float | None = None
    failed: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.failed == (self.p_value is not None):
            raise ConfigError("exactly one of p_value / failure flag must be set")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ConfigError(f"p-value {self.p_value} outside [0, 1]")

    @classmethod
    def failure(cls, method: str, reason: str, **diag) -> "TestResult":
        return cls(method=method, p_value=None, failed=True,
                   diagnostics={"reason": reason, **diag})


def _as_table(counts) -> np.ndarray:
    table = np.asarray(counts, dtype=float)
    if table.ndim != 2 or table.shape[0] != 2:
        raise ConfigError(f"expected a 2 x K table, got shape {table.shape}")
    if np.any(table < 0):
        raise ConfigError("negative cell count")
    return table


# --------------------------------------------------------------------------- #
# Pearson chi-square
# --------------------------------------------------------------------------- #

def chi_square_test(counts) -> TestResult:
    """Pearson chi-square on a 2 x K table, df = K' - 1 after dropping empty columns.

    No continuity correction. Columns that are all-zero in both groups are
    dropped and recorded; expected cells below 5 are flagged in diagnostics.
    """
    table = _as_table(counts)
    col_sums = table.sum(axis=0)
    dropped = np.nonzero(col_sums == 0)[0]
    table = table[:, col_sums > 0]
    diagnostics = {"dropped_columns": [int(i) for i in dropped]}
    if table.shape[1] < 2:
        return TestResult.failure("chisq", "single nonzero column", **diagnostics)
    row_sums = table.sum(axis=1)
    if np.any(row_sums == 0):
        return TestResult.failure("chisq", "empty group", **diagnostics)
    total = table.sum()
    expected = np.outer(row_sums, table.sum(axis=0)) / total
    statistic = float(((table - expected) ** 2 / expected).sum())
    df = table.shape[1] - 1
    diagnostics["df"] = df
    diagnostics["expected_below_5"] = int((expected < 5).sum())
    p = float(chi2.sf(statistic, df))
    return TestResult("chisq", p_value=p, statistic=statistic, diagnostics=diagnostics)


# --------------------------------------------------------------------------- #
# Fisher's exact test, Monte Carlo version
# --------------------------------------------------------------------------- #

#: Relative tolerance when comparing table probabilities, so that tables tied
#: with the observed one up to rounding count as "as extreme".
_TIE_REL_TOL = 1e-7


def _log_table_prob(first_row: np.ndarray, col_sums: np.ndarray) -> np.ndarray:
    """Log multivariate-hypergeometric pmf up to an additive constant."""
    a = np.atleast_2d(first_row)
    c = col_sums[None, :]
    return (gammaln(c + 1) - gammaln(a + 1) - gammaln(c - a + 1)).sum(axis=1)


def fisher_exact_mc(counts, n_tables: int, seed: int) -> TestResult:
    """Conditional-on-margins Monte Carlo p for a 2 x K table.

    Samples ``n_tables`` tables from the multivariate hypergeometric
    distribution fixed at the observed margins and estimates
    p = (1 + #{P(table) <= P(observed)}) / (n_tables + 1), which is strictly
    positive and deterministic given the seed.
    """
    if n_tables < 1000:
        raise ConfigError(f"n_tables must be >= 1000, got {n_tables}")
    table = _as_table(counts)
    col_sums = table.sum(axis=0).astype(np.int64)
    n1 = int(table[0].sum())
    if table.sum() == 0:
        return TestResult.failure("fisher-mc", "degenerate margins")
    # zero columns stay: they carry probability 1 and cannot change the p-value
    obs_logp = float(_log_table_prob(table[0].astype(np.int64), col_sums)[0])
    rng = np.random.default_rng(seed)
    draws = rng.multivariate_hypergeometric(col_sums, n1, size=n_tables)
    logp = _log_table_prob(draws, col_sums)
    hits = int((logp <= obs_logp + np.log1p(_TIE_REL_TOL)).sum())
    p = (1 + hits) / (n_tables + 1)
    return TestResult(
        "fisher-mc", p_value=p, statistic=obs_logp,
        diagnostics={"n_tables": n_tables, "seed": seed},
    )


# --------------------------------------------------------------------------- #
# Wilcoxon rank-sum
# --------------------------------------------------------------------------- #

def _midranks(pooled: np.ndarray) -> tuple[np.ndarray, float]:
    """Midranks of the pooled sample plus the tie-correction term sum(t^3 - t)."""
    from scipy.stats import rankdata

    ranks = rankdata(pooled, method="average")
    _, reps = np.unique(pooled, return_counts=True)
    reps = reps.astype(float)
    tie_term = float((reps**3 - reps).sum())
    return ranks, tie_term


def wilcoxon_rank_sum(y1, y2) -> TestResult:
    """Two-sided rank-sum test via the tie-corrected normal approximation.

    Uses midranks, the tie-corrected variance, and a continuity correction
    of 0.5 on the Mann-Whitney statistic.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    n1, n2 = y1.size, y2.size
    if n1 == 0 or n2 == 0:
        raise ConfigError("both groups must be non-empty")
    pooled = np.concatenate([y1, y2])
    ranks, tie_term = _midranks(pooled)
    n = n1 + n2
    variance = (n1 * n2 / 12.0) * (n + 1 - tie_term / (n * (n - 1)))
    if variance <= 0:
        return TestResult.failure("wilcoxon", "all pooled values tied")
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0
    diff = u - mean_u
    z = (diff - np.sign(diff) * 0.5) / np.sqrt(variance) if diff != 0 else 0.0
    p = float(min(1.0, 2.0 * norm.sf(abs(z))))
    return TestResult("wilcoxon", p_value=p, statistic=float(z),
                      diagnostics={"u": float(u)})


# --------------------------------------------------------------------------- #
# Proportional-odds ordinal logistic regression
# --------------------------------------------------------------------------- #

_PO_MAX_ITER = 50
_PO_GRAD_TOL = 1e-8
_PO_SEPARATION_BOUND = 30.0


def _po_loglik_parts(t: np.ndarray, counts: np.ndarray):
    """Log-likelihood, gradient, and Hessian in the monotone parameterization.

    ``t`` holds (t_1..t_{K-1}, beta); cutpoints are alpha_1 = t_1,
    alpha_j = alpha_{j-1} + exp(t_j), which keeps them strictly increasing.
    ``counts`` is the 2 x K table; group g has covariate z_g = g (0/1).
    """
    k = counts.shape[1]
    tc, beta = t[: k - 1], t[k - 1]
    alphas = np.empty(k - 1)
    alphas[0] = tc[0]
    if k > 2:
        alphas[1:] = tc[0] + np.cumsum(np.exp(tc[1:]))

    ll = 0.0
    grad_alpha = np.zeros(k - 1)
    grad_beta = 0.0
    h_aa = np.zeros((k - 1, k - 1))
    h_ab = np.zeros(k - 1)
    h_bb = 0.0

    for g, z in ((0, 0.0), (1, 1.0)):
        n = counts[g]
        eta = alphas - beta * z
        f_cum = expit(eta)
        dens = f_cum * (1.0 - f_cum)
        dens_prime = dens * (1.0 - 2.0 * f_cum)
        cell = np.diff(np.concatenate([[0.0], f_cum, [1.0]]))
        if np.any(cell <= 0):
            return -np.inf, None, None
        ll += float((n * np.log(cell)).sum())
        ratio = n / cell
        score_eta = dens * (ratio[:-1] - ratio[1:])

        m = np.zeros((k - 1, k - 1))
        diag = dens_prime * (ratio[:-1] - ratio[1:]) - dens**2 * (
            n[:-1] / cell[:-1] ** 2 + n[1:] / cell[1:] ** 2
        )
        np.fill_diagonal(m, diag)
        if k > 2:
            off = dens[:-1] * dens[1:] * n[1:-1] / cell[1:-1] ** 2
            idx = np.arange(k - 2)
            m[idx, idx + 1] = off
            m[idx + 1, idx] = off

        grad_alpha += score_eta
        grad_beta += -z * score_eta.sum()
        h_aa += m
        row = m.sum(axis=1)
        h_ab += -z * row
        h_bb += z * z * m.sum()

    # chain rule into t-space
    jac = np.zeros((k - 1, k - 1))
    jac[:, 0] = 1.0
    for i in range(1, k - 1):
        jac[i:, i] = np.exp(tc[i])
    grad = np.empty(k)
    grad[: k - 1] = jac.T @ grad_alpha
    grad[k - 1] = grad_beta
    hess = np.empty((k, k))
    hess[: k - 1, : k - 1] = jac.T @ h_aa @ jac
    for i in range(1, k - 1):
        hess[i, i] += np.exp(tc[i]) * grad_alpha[i:].sum()
    hess[: k - 1, k - 1] = jac.T @ h_ab
    hess[k - 1, : k - 1] = hess[: k - 1, k - 1]
    hess[k - 1, k - 1] = h_bb
    return ll, grad, hess


def po_logistic_from_counts(counts) -> TestResult:
    """Likelihood-ratio PO test on a 2 x K count table."""
    table = _as_table(counts)
    col_sums = table.sum(axis=0)
    dropped = np.nonzero(col_sums == 0)[0]
    table = table[:, col_sums > 0]
    diagnostics: dict = {"dropped_columns": [int(i) for i in dropped]}
    if table.shape[1] < 2:
        return TestResult.failure("po-logit", "fewer than 2 observed categories",
                                  **diagnostics)
    if np.any(table.sum(axis=1) == 0):
        return TestResult.failure("po-logit", "empty group", **diagnostics)

    k = table.shape[1]
    pooled = table.sum(axis=0)
    total = pooled.sum()
    ll_null = float((pooled * np.log(pooled / total)).sum())

    # start from the pooled cumulative logits with a zero treatment effect
    cum = np.cumsum(pooled)[:-1] / total
    alphas = np.log(cum / (1.0 - cum))
    t = np.empty(k)
    t[0] = alphas[0]
    if k > 2:
        t[1 : k - 1] = np.log(np.diff(alphas))
    t[k - 1] = 0.0

    ll, grad, hess = _po_loglik_parts(t, table)
    converged = False
    iterations = 0
    for iterations in range(1, _PO_MAX_ITER + 1):
        if np.max(np.abs(grad)) < _PO_GRAD_TOL:
            converged = True
            break
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad
        # step-halving keeps the log-likelihood non-decreasing
        scale = 1.0
        for _ in range(30):
            t_new = t - scale * step
            ll_new, grad_new, hess_new = _po_loglik_parts(t_new, table)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        else:
            return TestResult.failure("po-logit", "step-halving failed",
                                      iterations=iterations, **diagnostics)
        t, ll, grad, hess = t_new, ll_new, grad_new, hess_new
        if abs(t[k - 1]) > _PO_SEPARATION_BOUND:
            return TestResult.failure("po-logit", "separation",
                                      iterations=iterations, **diagnostics)
    if not converged and np.max(np.abs(grad)) >= _PO_GRAD_TOL:
        return TestResult.failure("po-logit", "no convergence",
                                  iterations=iterations, **diagnostics)

    lr = max(0.0, 2.0 * (ll - ll_null))
    p = float(chi2.sf(lr, 1))
    fitted_alphas = [float(t[0])]
    for i in range(1, k - 1):
        fitted_alphas.append(fitted_alphas[-1] + float(np.exp(t[i])))
    diagnostics.update(
        {"iterations": iterations, "beta": float(t[k - 1]), "alphas": fitted_alphas}
    )
    return TestResult("po-logit", p_value=p, statistic=lr, diagnostics=diagnostics)


def po_logistic_test(y, x) -> TestResult:
    """Proportional-odds LR test for a binary group effect on an ordinal outcome.

    ``y`` holds ordinal categories (any strictly ordered integer coding),
    ``x`` the group labels (exactly two distinct values).
    """
    y = np.asarray(y)
    x = np.asarray(x)
    groups = np.unique(x)
    if groups.size != 2:
        raise ConfigError(f"expected exactly 2 groups, got {groups.size}")
    cats = np.unique(y)
    counts = np.zeros((2, cats.size), dtype=np.int64)
    for gi, g in enumerate(groups):
        vals = y[x == g]
        for ci, c in enumerate(cats):
            counts[gi, ci] = int((vals == c).sum())
    return po_logistic_from_counts(counts)
