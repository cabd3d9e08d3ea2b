"""
backend/fairexp/storage/artifacts.py
On-disk formats: run JSON, epoch JSONL, model checkpoints and CSV tables

Layout under an output directory:

    runs/<cell>_<seed>.json              RunResult summary
    runs/<cell>_<seed>.epochs.jsonl      one EpochRecord per line
    runs/<cell>_<seed>.checkpoint.json   model parameters + normalizer
    explanations/<cell>_<seed>.csv       optional test-part importances
    summary.csv / summary.json           grid aggregate
    pareto.csv / pareto.json             non-dominated analysis
    lambda_sweep.csv                     per-lambda table

JSON is written with sorted keys and no timestamps so reruns are byte-identical.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from backend.data.dataset import Normalizer

from ..core.model import MlpModel
from ..utils.errors import ConfigurationError

CHECKPOINT_FORMAT = "fairexp-checkpoint"
CHECKPOINT_VERSION = 1


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _read_json(path) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def run_stem(cell_id: str, seed: int) -> str:
    return f"{cell_id}_{seed}"


# ── Checkpoints ────────────────────────────────────────────────────────────────


def checkpoint_dict(
    model: MlpModel,
    normalizer: Optional[Normalizer] = None,
    feature_names: Sequence[str] = (),
) -> Dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": model.to_dict(),
        "normalizer": None if normalizer is None else normalizer.to_dict(),
        "feature_names": list(feature_names),
    }


def write_checkpoint(path, model, normalizer=None, feature_names=()) -> Path:
    return _write_json(Path(path), checkpoint_dict(model, normalizer, feature_names))


def read_checkpoint(path):
    """Return (model, normalizer or None, feature names)."""
    data = _read_json(path)
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path} is not a model checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        version = data.get("version")
        raise ConfigurationError(f"unsupported checkpoint version {version}")
    norm = data.get("normalizer")
    return (
        MlpModel.from_dict(data["model"]),
        None if norm is None else Normalizer.from_dict(norm),
        list(data.get("feature_names", [])),
    )


# ── Runs ───────────────────────────────────────────────────────────────────────


def write_run(result, out_dir, cell_id: str) -> Dict[str, Path]:
    """Persist one RunResult as its three files under ``out_dir/runs``."""
    runs = Path(out_dir) / "runs"
    stem = run_stem(cell_id, result.seed)
    checkpoint = runs / f"{stem}.checkpoint.json"
    epochs = runs / f"{stem}.epochs.jsonl"

    payload = result.to_dict()
    payload["cell"] = cell_id
    payload["checkpoint"] = checkpoint.name
    payload["epoch_log"] = epochs.name
    summary = _write_json(runs / f"{stem}.json", payload)

    with open(epochs, "w", encoding="utf-8") as f:
        for record in result.history:
            f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    write_checkpoint(checkpoint, result.model, result.normalizer, result.feature_names)
    return {"run": summary, "epochs": epochs, "checkpoint": checkpoint}


def read_run(path) -> Dict:
    return _read_json(path)


def read_epochs(path) -> List[Dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def list_runs(out_dir) -> List[Path]:
    runs = Path(out_dir) / "runs"
    if not runs.exists():
        return []
    return sorted(
        p
        for p in runs.glob("*.json")
        if not p.name.endswith(".checkpoint.json")
    )


# ── Tables ─────────────────────────────────────────────────────────────────────


def write_table(rows: List[Dict], path, columns: Optional[List[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path


def read_table(path) -> pd.DataFrame:
    return pd.read_csv(path)


def write_json(path, payload) -> Path:
    return _write_json(Path(path), payload)


def read_json(path) -> Dict:
    return _read_json(path)


def write_explanations(
    path, importance: np.ndarray, feature_names: Sequence[str], instance_ids
) -> Path:
    """Long-format CSV: instance, feature, importance."""
    importance = np.asarray(importance)
    rows = [
        {"instance": int(inst), "feature": name, "importance": float(value)}
        for inst, row in zip(instance_ids, importance)
        for name, value in zip(feature_names, row)
    ]
    return write_table(rows, path, columns=["instance", "feature", "importance"])
