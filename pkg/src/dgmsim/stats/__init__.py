"""Statistical methods and performance measures, plus the string-id registry."""

from dataclasses import dataclass

from .tests import (
    TestResult,
    chi_square_test,
    fisher_exact_mc,
    po_logistic_from_counts,
    po_logistic_test,
    wilcoxon_rank_sum,
)
from .measures import auc_score, power_and_mcse
from .heterogeneity import tau2_estimate
from .de_scores import de_gene_scores


@dataclass(frozen=True)
class MethodSpec:
    """Registry entry: method id plus the family of inputs it consumes."""

    id: str
    kind: str  # "ordinal-test" | "de-scorer" | "tau2"


#: Methods available to study plans, keyed by the ids used in config files.
REGISTRY: dict[str, MethodSpec] = {
    "chisq": MethodSpec("chisq", "ordinal-test"),
    "fisher-mc": MethodSpec("fisher-mc", "ordinal-test"),
    "wilcoxon": MethodSpec("wilcoxon", "ordinal-test"),
    "po-logit": MethodSpec("po-logit", "ordinal-test"),
    "de-logt": MethodSpec("de-logt", "de-scorer"),
    "de-ranksum": MethodSpec("de-ranksum", "de-scorer"),
    "tau2-dl": MethodSpec("tau2-dl", "tau2"),
    "tau2-sj": MethodSpec("tau2-sj", "tau2"),
}

__all__ = [
    "TestResult",
    "chi_square_test",
    "fisher_exact_mc",
    "wilcoxon_rank_sum",
    "po_logistic_test",
    "po_logistic_from_counts",
    "auc_score",
    "power_and_mcse",
    "tau2_estimate",
    "de_gene_scores",
    "MethodSpec",
    "REGISTRY",
]
