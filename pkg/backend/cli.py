"""
backend/cli.py
==============
Command line for comprehensive-fairness experiments.

Commands
--------
train         train the single cell of a config (one run per seed)
grid          train every grid cell x seed, write summary.csv / summary.json
pareto        non-dominated analysis of one or more summaries
lambda-sweep  CFA over a list of lambda values, write lambda_sweep.csv

Usage:
    python -m backend.cli grid --config experiment.json --out results --parallel 4
    python -m backend.cli pareto results/summary.csv baseline/summary.csv
    python -m backend.cli lambda-sweep --config experiment.json --lambdas 0 0.1 1

Exit codes: 0 success, 1 unexpected error, 2 configuration or data error,
3 numeric failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

from backend.fairexp.analysis.selection import (
    frontier,
    lambda_sweep_table,
    pareto_points,
    read_summary,
    spearman_trend,
    summarize,
    summary_document,
)
from backend.fairexp.storage.artifacts import write_json, write_table
from backend.fairexp.utils.constants import DISTANCE_KINDS, GRID_PRESETS
from backend.jobs.experiment import ExperimentConfig
from backend.jobs.grid_runner import CellOutcome, build_tasks, run_grid
from backend.middleware.error_handler import (
    EXIT_OK,
    ErrorHandler,
    default_parallel,
    setup_logging,
)
from backend.middleware.validation import (
    ValidationError,
    validate_lambdas,
    validate_parallel,
    validate_seeds,
)

logger = logging.getLogger(__name__)

PARETO_COLUMNS = [
    "method",
    "config_id",
    "utility",
    "traditional_gap",
    "explanation_gap",
    "distance_to_ideal",
    "dominated",
]


# ── Shared steps ───────────────────────────────────────────────────────────────


def _load_experiment(args) -> ExperimentConfig:
    experiment = ExperimentConfig.load(args.config)
    if getattr(args, "preset", None):
        experiment = experiment.with_preset(args.preset)
    if args.seed_override:
        experiment = experiment.with_seeds(validate_seeds(list(args.seed_override)))
    return experiment


def _execute(
    experiment: ExperimentConfig, out_dir: Path, args
) -> Tuple[List[CellOutcome], Optional[int]]:
    """Run every (cell, seed); the second item is an exit code if all failed."""
    parallel = validate_parallel(getattr(args, "parallel", 1))
    ds = experiment.load_dataset()
    parts = experiment.make_split(ds)
    logger.info(
        "split sizes %s; %d cell(s) x %d seed(s)",
        parts.sizes(),
        len(experiment.cells()),
        len(experiment.seeds),
    )
    tasks = build_tasks(
        experiment,
        out_dir,
        distance=args.distance,
        export_explanations=getattr(args, "export_explanations", False),
    )
    outcomes = run_grid(tasks, ds, parts, parallel=parallel)

    failed = [o for o in outcomes if not o.ok]
    if failed and len(failed) == len(outcomes):
        first = failed[0]
        print(
            f"error: all {len(outcomes)} runs failed; "
            f"{first.cell_id} seed {first.seed}: {first.error}",
            file=sys.stderr,
        )
        return outcomes, first.exit_code
    return outcomes, None


def _write_summary(
    experiment: ExperimentConfig, outcomes: List[CellOutcome], out_dir: Path
) -> pd.DataFrame:
    runs = [o.run for o in outcomes if o.ok]
    failures = [o.failure() for o in outcomes if not o.ok]
    cells = {cell.cell_id: cell.params for cell in experiment.cells()}
    summary = summarize(runs, cells, experiment.method, failures)
    write_table(
        summary.to_dict(orient="records"),
        out_dir / "summary.csv",
        columns=list(summary.columns),
    )
    doc = summary_document(summary, experiment.selection, runs, failures)
    write_json(out_dir / "summary.json", doc)
    if doc["winner"] is not None:
        print(f"winner: {doc['winner']}")
    for failure in failures:
        logger.warning(
            "run %s seed %d failed: %s",
            failure["cell"],
            failure["seed"],
            failure["error"],
        )
    return summary


# ── Commands ───────────────────────────────────────────────────────────────────


def cmd_train(args) -> int:
    experiment = _load_experiment(args)
    if not experiment.is_singleton():
        raise ValidationError(
            "train needs one value per grid field; use the grid command"
        )
    out_dir = experiment.resolve_output(args.out)
    outcomes, code = _execute(experiment, out_dir, args)
    if code is not None:
        return code
    for outcome in outcomes:
        if outcome.ok:
            score = outcome.run["test_report"]["score"]
            print(f"{outcome.cell_id} seed {outcome.seed}: test score {score:.2f}")
        else:
            print(f"{outcome.cell_id} seed {outcome.seed}: failed ({outcome.error})")
    return EXIT_OK


def cmd_grid(args) -> int:
    experiment = _load_experiment(args)
    out_dir = experiment.resolve_output(args.out)
    outcomes, code = _execute(experiment, out_dir, args)
    if code is not None:
        return code
    _write_summary(experiment, outcomes, out_dir)
    print(f"summary written to {out_dir / 'summary.csv'}")
    return EXIT_OK


def cmd_pareto(args) -> int:
    frames = [read_summary(path) for path in args.summaries]
    summary = pd.concat(frames, ignore_index=True)
    points = pareto_points(summary, source=args.source)
    if not points:
        raise ValidationError("summaries hold no rows with complete metrics")

    out_dir = Path(args.out) if args.out else Path(args.summaries[0]).parent
    write_table(
        [p.to_dict() for p in points], out_dir / "pareto.csv", columns=PARETO_COLUMNS
    )
    write_json(
        out_dir / "pareto.json",
        {
            "source": args.source,
            "summaries": [Path(p).name for p in args.summaries],
            "points": [p.to_dict() for p in points],
            "frontier": [p.to_dict() for p in frontier(points)],
        },
    )
    print(f"{len(frontier(points))} of {len(points)} points are non-dominated")
    return EXIT_OK


def cmd_lambda_sweep(args) -> int:
    lambdas = validate_lambdas(args.lambdas)
    experiment = _load_experiment(args).with_lambdas(lambdas)
    out_dir = experiment.resolve_output(args.out)
    outcomes, code = _execute(experiment, out_dir, args)
    if code is not None:
        return code
    summary = _write_summary(experiment, outcomes, out_dir)
    cells = {cell.cell_id: cell.params["lam"] for cell in experiment.cells()}
    table = lambda_sweep_table(summary, cells)
    write_table(
        table.to_dict(orient="records"),
        out_dir / "lambda_sweep.csv",
        columns=list(table.columns),
    )
    trend = spearman_trend(table, "test_traditional_gap_mean")
    if trend is not None:
        logger.info("spearman(lambda, test traditional gap) = %.3f", trend)
    print(f"lambda sweep written to {out_dir / 'lambda_sweep.csv'}")
    return EXIT_OK


# ── Parser ─────────────────────────────────────────────────────────────────────


def _add_run_options(parser: argparse.ArgumentParser, parallel: bool = True):
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument(
        "--seed-override",
        type=int,
        nargs="+",
        metavar="SEED",
        help="replace the config seeds",
    )
    parser.add_argument(
        "--distance",
        choices=DISTANCE_KINDS,
        help="override the subgroup distance of every cell",
    )
    parser.add_argument(
        "--export-explanations",
        action="store_true",
        help="write test-part feature importances per run",
    )
    if parallel:
        parser.add_argument(
            "--parallel",
            type=int,
            default=default_parallel(),
            help="worker processes (default FAIREXP_PARALLEL or 1)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairexp",
        description="Train and compare fairness-regularized classifiers",
    )
    parser.add_argument("--log-level", help="logging level (default INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a single-cell config")
    _add_run_options(train, parallel=False)
    train.set_defaults(func=cmd_train)

    grid = sub.add_parser("grid", help="run a hyperparameter grid")
    _add_run_options(grid)
    grid.add_argument(
        "--preset",
        choices=sorted(GRID_PRESETS),
        help="fill an empty grid with a standard search range",
    )
    grid.set_defaults(func=cmd_grid)

    pareto = sub.add_parser("pareto", help="Pareto analysis of summaries")
    pareto.add_argument("summaries", nargs="+", help="summary.csv file(s)")
    pareto.add_argument("--out", help="output directory (default: first summary's)")
    pareto.add_argument("--source", choices=("val", "test"), default="test")
    pareto.set_defaults(func=cmd_pareto)

    sweep = sub.add_parser("lambda-sweep", help="CFA over a list of lambdas")
    _add_run_options(sweep)
    sweep.add_argument("--lambdas", type=float, nargs="+", required=True)
    sweep.set_defaults(func=cmd_lambda_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    handler = ErrorHandler()
    try:
        return args.func(args)
    except Exception as exc:
        return handler.handle(exc)


if __name__ == "__main__":
    sys.exit(main())
