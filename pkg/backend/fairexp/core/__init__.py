"""backend/fairexp/core/__init__.py"""
from .distances import (
    DistancePlan,
    DistanceSpec,
    cosine_distance,
    kl_distance,
    mse_distance,
    subgroup_distance,
    sw_distance,
)
from .groups import SubgroupView
from .model import (
    ForwardTrace,
    LossTerms,
    MlpModel,
    backward,
    composite_loss,
    forward,
    predict_proba,
    sgd_step,
)
from .numerics import Matrix, Rng, as_matrix, child_rngs, grad_check, make_rng, matmul

__all__ = [
    "Matrix",
    "Rng",
    "SubgroupView",
    "as_matrix",
    "child_rngs",
    "grad_check",
    "make_rng",
    "matmul",
    "DistancePlan",
    "DistanceSpec",
    "sw_distance",
    "cosine_distance",
    "kl_distance",
    "mse_distance",
    "subgroup_distance",
    "MlpModel",
    "ForwardTrace",
    "LossTerms",
    "forward",
    "predict_proba",
    "composite_loss",
    "backward",
    "sgd_step",
]
