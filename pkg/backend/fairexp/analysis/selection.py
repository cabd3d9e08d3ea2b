"""
backend/fairexp/analysis/selection.py
Grid aggregation, model selection, Pareto-frontier and lambda-sweep tables

All values here are on the reporting scale (x100), as stored in run files.
Each run contributes three trade-off axes per report:

    utility           (AUC + F1 + Acc) / 3       higher is better
    traditional_gap   (D_SP + D_EO) / 2          lower is better
    explanation_gap   (D_REF + D_VEF) / 2        lower is better
"""

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from ..utils.constants import REPORT_METRICS, REPORT_SCALE
from ..utils.errors import ConfigurationError, SchemaError

PARTS = ("val", "test")
AXES = ("utility", "traditional_gap", "explanation_gap")
SUMMARY_METRICS = REPORT_METRICS + AXES
SWEEP_METRICS = ("utility", "traditional_gap", "ref", "vef", "score")


def trade_off_axes(report: Dict) -> Dict[str, float]:
    return {
        "utility": (report["auc"] + report["f1"] + report["acc"]) / 3.0,
        "traditional_gap": (report["sp"] + report["eo"]) / 2.0,
        "explanation_gap": (report["ref"] + report["vef"]) / 2.0,
    }


def _cell_value(value):
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    return value


def run_rows(runs: Sequence[Dict]) -> pd.DataFrame:
    """One row per run: cell, seed and every metric of both reports."""
    rows = []
    for run in runs:
        row = {"cell": run["cell"], "seed": run["seed"], "method": run["method"]}
        for part in PARTS:
            report = run[f"{part}_report"]
            values = {m: report[m] for m in REPORT_METRICS}
            values.update(trade_off_axes(report))
            row.update({f"{part}_{m}": v for m, v in values.items()})
        rows.append(row)
    columns = ["cell", "seed", "method"] + [
        f"{p}_{m}" for p in PARTS for m in SUMMARY_METRICS
    ]
    return pd.DataFrame(rows, columns=columns)


def summarize(
    runs: Sequence[Dict],
    cells: Dict[str, Dict],
    method: str,
    failures: Sequence[Dict] = (),
) -> pd.DataFrame:
    """
    Mean and population std of every metric per cell.

    ``cells`` maps cell id to its grid parameters; cells whose runs all failed
    keep a row with NaN metrics.
    """
    per_run = run_rows(runs)
    metric_cols = [f"{p}_{m}" for p in PARTS for m in SUMMARY_METRICS]
    grouped = per_run.groupby("cell", sort=True)[metric_cols]
    means = grouped.mean()
    stds = grouped.std(ddof=0)
    counts = per_run.groupby("cell", sort=True).size()
    failed = pd.Series([f["cell"] for f in failures], dtype=object).value_counts()

    param_names = sorted({name for params in cells.values() for name in params})
    rows = []
    for cell_id in sorted(cells):
        row = {"cell": cell_id, "method": method}
        row.update({n: _cell_value(cells[cell_id].get(n)) for n in param_names})
        row["n_runs"] = int(counts.get(cell_id, 0))
        row["n_failed"] = int(failed.get(cell_id, 0))
        for col in metric_cols:
            has = cell_id in means.index
            row[f"{col}_mean"] = float(means.at[cell_id, col]) if has else math.nan
            row[f"{col}_std"] = float(stds.at[cell_id, col]) if has else math.nan
        rows.append(row)

    columns = ["cell", "method", *param_names, "n_runs", "n_failed"]
    columns += [f"{c}_{stat}" for c in metric_cols for stat in ("mean", "std")]
    return pd.DataFrame(rows, columns=columns)


def select_winner(summary: pd.DataFrame, column: str = "val_score_mean"):
    """Cell with the best mean validation Score; ties go to the smaller id."""
    valid = summary.dropna(subset=[column])
    if valid.empty:
        return None
    ranked = sorted(zip(valid[column], valid["cell"]), key=lambda t: (-t[0], t[1]))
    return ranked[0][1]


def per_seed_winners(runs: Sequence[Dict]) -> Dict[str, str]:
    """Best cell by validation Score for each seed separately."""
    best: Dict[int, tuple] = {}
    for run in runs:
        key = (-run["val_report"]["score"], run["cell"])
        if run["seed"] not in best or key < best[run["seed"]]:
            best[run["seed"]] = key
    return {str(seed): best[seed][1] for seed in sorted(best)}


def _json_ready(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return _json_ready(value.item())
    return value


def summary_document(
    summary: pd.DataFrame,
    selection: str,
    runs: Sequence[Dict],
    failures: Sequence[Dict],
) -> Dict:
    rows = [
        {k: _json_ready(v) for k, v in row.items()}
        for row in summary.to_dict(orient="records")
    ]
    doc = {
        "rows": rows,
        "winner": select_winner(summary),
        "selection": selection,
        "failures": list(failures),
        "scale": REPORT_SCALE,
    }
    if selection == "per_seed":
        doc["per_seed_winners"] = per_seed_winners(runs)
    return doc


def read_summary(path) -> pd.DataFrame:
    """Load a summary CSV and check it carries the columns analyses need."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"summary file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"{path} is not a summary table: {exc}") from exc
    required = {"cell", "method"} | {f"{p}_{a}_mean" for p in PARTS for a in AXES}
    missing = sorted(required - set(frame.columns))
    if missing:
        raise SchemaError(f"{path} is missing summary columns {missing}")
    if frame.empty:
        raise SchemaError(f"{path} has no rows")
    return frame


# ── Pareto frontier ────────────────────────────────────────────────────────────


@dataclass
class ParetoPoint:
    config_id: str
    method: str
    utility: float
    traditional_gap: float
    explanation_gap: float
    dominated: bool = False
    distance_to_ideal: float = 0.0

    def to_dict(self) -> Dict:
        return asdict(self)


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """a is at least as good as b on every axis and strictly better on one."""
    no_worse = (
        a.utility >= b.utility
        and a.traditional_gap <= b.traditional_gap
        and a.explanation_gap <= b.explanation_gap
    )
    better = (
        a.utility > b.utility
        or a.traditional_gap < b.traditional_gap
        or a.explanation_gap < b.explanation_gap
    )
    return no_worse and better


def mark_dominated(points: List[ParetoPoint]) -> List[ParetoPoint]:
    """Set ``dominated`` and the distance to the ideal point on every point."""
    for point in points:
        point.dominated = any(
            dominates(other, point) for other in points if other is not point
        )
        point.distance_to_ideal = float(
            np.linalg.norm(
                [
                    REPORT_SCALE - point.utility,
                    point.traditional_gap,
                    point.explanation_gap,
                ]
            )
        )
    return points


def pareto_points(summary: pd.DataFrame, source: str = "test") -> List[ParetoPoint]:
    """Trade-off points of every summary row with complete metrics."""
    if source not in PARTS:
        raise ConfigurationError(
            f"Unknown source '{source}'. Must be one of: val, test"
        )
    cols = [f"{source}_{axis}_mean" for axis in AXES]
    frame = summary.dropna(subset=cols).sort_values(["method", "cell"], kind="stable")
    points = [
        ParetoPoint(
            config_id=str(row["cell"]),
            method=str(row["method"]),
            utility=float(row[cols[0]]),
            traditional_gap=float(row[cols[1]]),
            explanation_gap=float(row[cols[2]]),
        )
        for _, row in frame.iterrows()
    ]
    return mark_dominated(points)


def frontier(points: Sequence[ParetoPoint]) -> List[ParetoPoint]:
    return [p for p in points if not p.dominated]


# ── Lambda sweep ───────────────────────────────────────────────────────────────


def lambda_sweep_table(
    summary: pd.DataFrame, lambdas: Dict[str, float]
) -> pd.DataFrame:
    """
    One row per lambda in ascending order.

    ``lambdas`` maps cell id to its lambda value.
    """
    columns = ["lam", "cell", "n_runs"] + [
        f"{p}_{m}_{stat}"
        for p in PARTS
        for m in SWEEP_METRICS
        for stat in ("mean", "std")
    ]
    indexed = summary.set_index("cell")
    rows = []
    for cell_id, lam in sorted(lambdas.items(), key=lambda t: (t[1], t[0])):
        row = {"lam": lam, "cell": cell_id}
        row["n_runs"] = int(indexed.at[cell_id, "n_runs"])
        for col in columns[3:]:
            row[col] = indexed.at[cell_id, col]
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def spearman_trend(table: pd.DataFrame, column: str) -> Optional[float]:
    """Spearman correlation between lambda and ``column`` (None if undefined)."""
    valid = table.dropna(subset=[column])
    if len(valid) < 2 or valid[column].nunique() < 2:
        return None
    rho, _ = spearmanr(valid["lam"], valid[column])
    return float(rho)
