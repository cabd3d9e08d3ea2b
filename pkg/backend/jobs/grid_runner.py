"""
backend/jobs/grid_runner.py
Bounded worker pool for grid cells with per-run progress logging
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from backend.data.dataset import Dataset, Split
from backend.fairexp.analysis.explain import explain
from backend.fairexp.storage.artifacts import run_stem, write_explanations, write_run
from backend.fairexp.training.trainer import TrainConfig, run_method
from backend.fairexp.utils.errors import FairExpError
from backend.middleware.error_handler import ErrorHandler

logger = logging.getLogger(__name__)

# Dataset and split shared read-only by every task of a worker process
_WORKER_STATE: Dict = {}


@dataclass(frozen=True)
class CellTask:
    """One (cell, seed) training run."""

    cell_id: str
    seed: int
    method: str
    params: Dict
    config: Dict
    out_dir: str
    export_explanations: bool = False


@dataclass
class CellOutcome:
    cell_id: str
    seed: int
    params: Dict
    run: Optional[Dict] = None
    error: Optional[str] = None
    error_type: Optional[str] = None
    exit_code: int = 0
    elapsed_seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.run is not None

    def failure(self) -> Dict:
        return {
            "cell": self.cell_id,
            "seed": self.seed,
            "error": self.error,
            "error_type": self.error_type,
        }


# ── Workers ────────────────────────────────────────────────────────────────────


def _init_worker(dataset: Dataset, parts: Split):
    _WORKER_STATE["dataset"] = dataset
    _WORKER_STATE["split"] = parts


def _export_explanations(result, ds: Dataset, parts: Split, out_dir: Path, stem):
    cfg = result.config
    norm = result.normalizer
    x_test = norm.transform(ds.x[parts.test])
    exp = explain(
        result.model,
        x_test,
        cfg.eval_explainer,
        reference=norm.transform(ds.x[parts.train]),
        n_neighbors=cfg.n_neighbors,
        lasso_penalty=cfg.lasso_penalty,
    )
    path = out_dir / "explanations" / f"{stem}.csv"
    write_explanations(path, exp.importance, result.feature_names, parts.test)


def execute_task(task: CellTask) -> CellOutcome:
    """Train one run and write its artifacts; library errors are recorded."""
    ds, parts = _WORKER_STATE["dataset"], _WORKER_STATE["split"]
    outcome = CellOutcome(task.cell_id, task.seed, task.params)
    t0 = time.time()
    try:
        cfg = TrainConfig.from_dict(task.config)
        result = run_method(task.method, ds, parts, cfg)
        write_run(result, task.out_dir, task.cell_id)
        if task.export_explanations:
            stem = run_stem(task.cell_id, task.seed)
            _export_explanations(result, ds, parts, Path(task.out_dir), stem)
        run = result.to_dict()
        run["cell"] = task.cell_id
        outcome.run = run
    except FairExpError as exc:
        outcome.error = str(exc)
        outcome.error_type = type(exc).__name__
        outcome.exit_code = ErrorHandler.exit_code_for(exc)
        ErrorHandler(__name__).log_error(
            outcome.error_type,
            outcome.error,
            {"cell": task.cell_id, "seed": task.seed},
        )
    outcome.elapsed_seconds = time.time() - t0
    return outcome


def run_grid(
    tasks: List[CellTask],
    dataset: Dataset,
    parts: Split,
    parallel: int = 1,
) -> List[CellOutcome]:
    """
    Execute ``tasks`` on a pool of ``parallel`` processes (inline when 1).

    Outcomes come back sorted by (cell id, seed) whatever the completion order.
    """
    total = len(tasks)
    outcomes: List[CellOutcome] = []
    t0 = time.time()

    def record(outcome: CellOutcome):
        outcomes.append(outcome)
        index = len(outcomes)
        elapsed = time.time() - t0
        logger.info(
            "[%d/%d] %s seed=%d %s (%.1fs, ~%.0fs left)",
            index,
            total,
            outcome.cell_id,
            outcome.seed,
            "ok" if outcome.ok else f"failed: {outcome.error}",
            outcome.elapsed_seconds,
            elapsed / index * (total - index),
        )

    if parallel <= 1:
        _init_worker(dataset, parts)
        try:
            for task in tasks:
                record(execute_task(task))
        finally:
            _WORKER_STATE.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=parallel,
            initializer=_init_worker,
            initargs=(dataset, parts),
        ) as pool:
            futures = [pool.submit(execute_task, task) for task in tasks]
            for future in as_completed(futures):
                record(future.result())

    outcomes.sort(key=lambda o: (o.cell_id, o.seed))
    logger.info(
        "grid finished: %d runs, %d failed", total, sum(not o.ok for o in outcomes)
    )
    return outcomes


def build_tasks(
    experiment,
    out_dir,
    distance: Optional[str] = None,
    export_explanations: bool = False,
) -> List[CellTask]:
    """One task per (cell, seed) of ``experiment``."""
    tasks = []
    for cell in experiment.cells():
        for seed in experiment.seeds:
            cfg = experiment.train_config(cell, seed, distance)
            tasks.append(
                CellTask(
                    cell_id=cell.cell_id,
                    seed=seed,
                    method=experiment.method,
                    params=cell.params,
                    config=cfg.to_dict(),
                    out_dir=str(out_dir),
                    export_explanations=export_explanations,
                )
            )
    return tasks
