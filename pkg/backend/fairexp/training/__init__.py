"""backend/fairexp/training/__init__.py"""
from .trainer import (
    EpochRecord,
    RunResult,
    TrainConfig,
    evaluate,
    representation_gap,
    reweight_weights,
    run_method,
    train_cfa,
    train_reweight,
    train_vanilla,
)

__all__ = [
    "EpochRecord",
    "RunResult",
    "TrainConfig",
    "evaluate",
    "representation_gap",
    "reweight_weights",
    "run_method",
    "train_cfa",
    "train_reweight",
    "train_vanilla",
]
