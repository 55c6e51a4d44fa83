"""The four parametric DGM families and their estimators."""

from .ordinal import (
    OrdinalTwoArmConfig,
    estimate_ordinal_probs,
    normalize_probs,
    relative_effect,
    sample_ordinal,
)
from .survival import SurvivalTwoArmConfig, sample_survival
from .meta import MetaAnalysisConfig, hedges_g, sample_meta
from .de import (
    DEConfig,
    ExpressionPool,
    assign_fold_changes,
    draw_expression_params,
    load_expression_params,
    load_expression_pool,
    sample_counts,
)

__all__ = [
    "OrdinalTwoArmConfig",
    "sample_ordinal",
    "estimate_ordinal_probs",
    "relative_effect",
    "normalize_probs",
    "SurvivalTwoArmConfig",
    "sample_survival",
    "MetaAnalysisConfig",
    "sample_meta",
    "hedges_g",
    "DEConfig",
    "ExpressionPool",
    "assign_fold_changes",
    "sample_counts",
    "load_expression_pool",
    "draw_expression_params",
    "load_expression_params",
]
