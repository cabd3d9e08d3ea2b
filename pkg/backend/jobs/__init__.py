"""backend/jobs/__init__.py"""
from .experiment import ExperimentConfig, GridCell, format_value
from .grid_runner import (
    CellOutcome,
    CellTask,
    build_tasks,
    execute_task,
    run_grid,
)

__all__ = [
    "ExperimentConfig",
    "GridCell",
    "format_value",
    "CellOutcome",
    "CellTask",
    "build_tasks",
    "execute_task",
    "run_grid",
]
