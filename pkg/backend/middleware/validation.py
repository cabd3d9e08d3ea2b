"""
backend/middleware/validation.py
Validation of experiment configuration documents and command-line values
"""

import math
from dataclasses import fields
from typing import Dict, List

from backend.fairexp.training.trainer import TrainConfig
from backend.fairexp.utils.constants import (
    DEFAULT_SEEDS,
    DISTANCE_KINDS,
    EXPLAINERS,
    FAIRNESS_RAMP,
    FAIRNESS_WARMUP,
    FIDELITY_VARIANTS,
    METHODS,
    MULTI_CLASS_MODES,
    SPLIT_FRACTIONS,
    TRAIN_MODES,
    VEF_SCOPES,
)
from backend.fairexp.utils.errors import ConfigurationError

TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}
DISTANCE_FIELDS = {
    "kind",
    "n_samples",
    "slices",
    "eps",
    "class_conditioned",
    "per_row_cosine",
}
EXPERIMENT_KEYS = {
    "dataset",
    "split",
    "seeds",
    "method",
    "base",
    "grid",
    "selection",
    "output_dir",
}
SELECTIONS = ("mean", "per_seed")


class ValidationError(ConfigurationError):
    """Configuration document failed validation"""

    pass


def _number(value, name: str) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"{name} must be a number")
    try:
        out = float(value)
    except (ValueError, TypeError):
        raise ValidationError(f"{name} must be a number")
    if not math.isfinite(out):
        raise ValidationError(f"{name} must be finite")
    return out


def _integer(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be an integer")
    if int(value) != value:
        raise ValidationError(f"{name} must be an integer")
    return int(value)


def _choice(value, name: str, options) -> str:
    if value not in options:
        choices = ", ".join(options)
        raise ValidationError(f"Invalid {name} '{value}'. Must be one of: {choices}")
    return value


def validate_fractions(fractions) -> List[float]:
    """Validate train/val/test fractions."""
    if not isinstance(fractions, (list, tuple)) or len(fractions) != 3:
        raise ValidationError("split fractions must be a list of three numbers")
    values = [_number(f, "split fraction") for f in fractions]
    if min(values) <= 0:
        raise ValidationError("split fractions must be positive")
    if abs(sum(values) - 1.0) > 1e-9:
        raise ValidationError(f"split fractions must sum to 1 (got {sum(values)})")
    return values


def validate_seeds(seeds) -> List[int]:
    """Validate the list of run seeds."""
    if not isinstance(seeds, list) or not seeds:
        raise ValidationError("seeds must be a non-empty list")
    out = [_integer(s, "seed") for s in seeds]
    if min(out) < 0:
        raise ValidationError("seeds must be nonnegative")
    if len(set(out)) != len(out):
        raise ValidationError("seeds must be distinct")
    return out


def validate_method(method: str) -> str:
    return _choice(method, "method", METHODS)


def validate_distance(value):
    """Validate a distance given as a kind string or an option mapping."""
    if isinstance(value, str):
        return _choice(value.lower(), "distance", DISTANCE_KINDS)
    if not isinstance(value, dict):
        raise ValidationError("distance must be a kind or an object")
    unknown = sorted(set(value) - DISTANCE_FIELDS)
    if unknown:
        raise ValidationError(f"Unknown distance options: {unknown}")
    out = dict(value)
    kind = str(value.get("kind", "sw")).lower()
    out["kind"] = _choice(kind, "distance", DISTANCE_KINDS)
    n_samples = out.get("n_samples")
    if n_samples is not None and _integer(n_samples, "n_samples") < 1:
        raise ValidationError("n_samples must be at least 1")
    if "slices" in out and _integer(out["slices"], "slices") < 1:
        raise ValidationError("slices must be at least 1")
    if "eps" in out and _number(out["eps"], "eps") <= 0:
        raise ValidationError("eps must be positive")
    return out


def validate_train_options(options: Dict) -> Dict:
    """Validate TrainConfig overrides (names and ranges)."""
    if not isinstance(options, dict):
        raise ValidationError("training options must be an object")
    unknown = sorted(set(options) - TRAIN_FIELDS)
    if unknown:
        raise ValidationError(f"Unknown training options: {unknown}")

    out = dict(options)
    for name in ("lam", "alpha", "beta", "weight_decay", "max_grad_norm"):
        if name in out and _number(out[name], name) < 0:
            raise ValidationError(f"{name} must be nonnegative")
    if "learning_rate" in out and _number(out["learning_rate"], "lr") <= 0:
        raise ValidationError("learning_rate must be positive")
    if "k_percent" in out:
        k = _number(out["k_percent"], "k_percent")
        if not 0 < k <= 100:
            raise ValidationError("k_percent must lie in (0, 100]")
    if "dropout" in out:
        p = _number(out["dropout"], "dropout")
        if not 0 <= p < 1:
            raise ValidationError("dropout must lie in [0, 1)")
    for name in ("fairness_warmup", "fairness_ramp"):
        if name in out and not 0 <= _number(out[name], name) <= 1:
            raise ValidationError(f"{name} must lie in [0, 1]")
    warmup = out.get("fairness_warmup", FAIRNESS_WARMUP)
    if warmup + out.get("fairness_ramp", FAIRNESS_RAMP) > 1:
        raise ValidationError("fairness_warmup + fairness_ramp must be at most 1")
    for name in (
        "epochs",
        "patience",
        "k_mask",
        "hidden_layers",
        "hidden_width",
        "mask_refresh_every",
        "n_neighbors",
        "reweight_iterations",
    ):
        if name in out and _integer(out[name], name) < 1:
            raise ValidationError(f"{name} must be at least 1")
    if "seed" in out and _integer(out["seed"], "seed") < 0:
        raise ValidationError("seed must be nonnegative")
    if "reweight_eta" in out:
        _number(out["reweight_eta"], "reweight_eta")
    if "lasso_penalty" in out and _number(out["lasso_penalty"], "lasso_penalty") < 0:
        raise ValidationError("lasso_penalty must be nonnegative")
    if "mode" in out:
        _choice(out["mode"], "mode", TRAIN_MODES)
    for name in ("train_explainer", "selection_explainer", "eval_explainer"):
        if name in out:
            _choice(out[name], name, EXPLAINERS)
    if "fidelity_variant" in out:
        _choice(out["fidelity_variant"], "fidelity_variant", FIDELITY_VARIANTS)
    if "vef_scope" in out:
        _choice(out["vef_scope"], "vef_scope", VEF_SCOPES)
    if "multi_class_mode" in out:
        _choice(out["multi_class_mode"], "multi_class_mode", MULTI_CLASS_MODES)
    if "distance" in out:
        out["distance"] = validate_distance(out["distance"])
    return out


def validate_grid(grid: Dict) -> Dict[str, list]:
    """Validate a grid: each field maps to a non-empty list of valid values."""
    if not isinstance(grid, dict):
        raise ValidationError("grid must be an object mapping fields to lists")
    out = {}
    for name in sorted(grid):
        values = grid[name]
        if not isinstance(values, list) or not values:
            raise ValidationError(f"grid field '{name}' must be a non-empty list")
        out[name] = [validate_train_options({name: v})[name] for v in values]
    return out


def validate_lambdas(lambdas) -> List[float]:
    """Validate a lambda sweep list."""
    if not isinstance(lambdas, (list, tuple)) or len(lambdas) < 2:
        raise ValidationError("lambda sweep needs at least 2 values")
    values = [_number(v, "lambda") for v in lambdas]
    if min(values) < 0:
        raise ValidationError("lambda values must be nonnegative")
    if len(set(values)) != len(values):
        raise ValidationError("lambda values must be distinct")
    return values


def validate_parallel(parallel) -> int:
    """Validate worker pool size."""
    value = _integer(parallel, "parallel")
    if value < 1:
        raise ValidationError("parallel must be at least 1")
    if value > 256:
        raise ValidationError("parallel max is 256")
    return value


def validate_dataset(spec: Dict) -> Dict:
    """Validate the dataset section (CSV schema or synthetic generator)."""
    if not isinstance(spec, dict):
        raise ValidationError("dataset must be an object")
    kind = spec.get("kind", "csv")
    if kind == "synthetic":
        out = {
            "kind": "synthetic",
            "n": _integer(spec.get("n", 2000), "n"),
            "d": _integer(spec.get("d", 5), "d"),
            "bias": _number(spec.get("bias", 0.4), "bias"),
            "seed": _integer(spec.get("seed", 0), "dataset seed"),
        }
        if not 0 <= out["bias"] <= 1:
            raise ValidationError("bias must lie in [0, 1]")
        return out
    if kind != "csv":
        raise ValidationError("dataset kind must be 'csv' or 'synthetic'")
    for key in ("path", "label_column", "sensitive_column", "positive_label"):
        if key not in spec:
            raise ValidationError(f"dataset is missing '{key}'")
    mapping = spec.get("sensitive_mapping")
    if not isinstance(mapping, dict) or len(mapping) < 2:
        raise ValidationError("sensitive_mapping must map at least 2 values")
    classes = sorted({_integer(v, "sensitive class") for v in mapping.values()})
    if classes != list(range(len(classes))):
        raise ValidationError("sensitive classes must be 0..C-1")
    return dict(spec, kind="csv")


def validate_experiment(doc: Dict) -> Dict:
    """Validate a full experiment document and fill defaults."""
    if not isinstance(doc, dict):
        raise ValidationError("experiment config must be a JSON object")
    unknown = sorted(set(doc) - EXPERIMENT_KEYS)
    if unknown:
        raise ValidationError(f"Unknown config keys: {unknown}")
    if "dataset" not in doc:
        raise ValidationError("config is missing 'dataset'")

    split = doc.get("split", {})
    if not isinstance(split, dict):
        raise ValidationError("split must be an object")
    return {
        "dataset": validate_dataset(doc["dataset"]),
        "split": {
            "fractions": validate_fractions(
                split.get("fractions", list(SPLIT_FRACTIONS))
            ),
            "seed": _integer(split.get("seed", 0), "split seed"),
        },
        "seeds": validate_seeds(doc.get("seeds", list(DEFAULT_SEEDS))),
        "method": validate_method(doc.get("method", "cfa")),
        "base": validate_train_options(doc.get("base", {})),
        "grid": validate_grid(doc.get("grid", {})),
        "selection": _choice(doc.get("selection", "mean"), "selection", SELECTIONS),
        "output_dir": doc.get("output_dir"),
    }
