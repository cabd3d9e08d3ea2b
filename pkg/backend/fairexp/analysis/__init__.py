"""backend/fairexp/analysis/__init__.py"""
from .explain import (
    Explanation,
    FidelityRecord,
    HsicLassoExplainer,
    Mask,
    build_mask,
    explain,
    explain_gradient,
    explain_hsic_lasso,
    fidelity,
)
from .fairmetrics import (
    EqScores,
    FairnessReport,
    build_report,
    delta_eo,
    delta_ref,
    delta_sp,
    delta_vef,
    label_top_k,
    multi_class_gap,
    overall_score,
    utility_metrics,
)
from .selection import (
    ParetoPoint,
    dominates,
    lambda_sweep_table,
    pareto_points,
    read_summary,
    select_winner,
    summarize,
)

__all__ = [
    "Explanation",
    "Mask",
    "FidelityRecord",
    "HsicLassoExplainer",
    "explain",
    "explain_gradient",
    "explain_hsic_lasso",
    "build_mask",
    "fidelity",
    "EqScores",
    "FairnessReport",
    "build_report",
    "delta_sp",
    "delta_eo",
    "delta_ref",
    "delta_vef",
    "label_top_k",
    "multi_class_gap",
    "overall_score",
    "utility_metrics",
    "ParetoPoint",
    "dominates",
    "lambda_sweep_table",
    "pareto_points",
    "read_summary",
    "select_winner",
    "summarize",
]
