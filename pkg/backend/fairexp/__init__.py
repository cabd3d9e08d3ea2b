"""Fairness-aware training and explanation-fairness auditing for tabular classifiers."""

__version__ = "1.0.0"

# Training lives in fairexp.training and is imported from there; it depends on
# backend.data, which in turn imports fairexp.core.
from .analysis import (
    FairnessReport,
    build_mask,
    build_report,
    explain,
    fidelity,
    overall_score,
)
from .core import (
    DistanceSpec,
    LossTerms,
    MlpModel,
    SubgroupView,
    backward,
    composite_loss,
    forward,
    make_rng,
)

__all__ = [
    "DistanceSpec",
    "LossTerms",
    "MlpModel",
    "SubgroupView",
    "forward",
    "composite_loss",
    "backward",
    "make_rng",
    "FairnessReport",
    "build_report",
    "build_mask",
    "explain",
    "fidelity",
    "overall_score",
]
