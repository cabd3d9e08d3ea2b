"""backend/fairexp/storage/__init__.py"""
from .artifacts import (
    list_runs,
    read_checkpoint,
    read_epochs,
    read_json,
    read_run,
    read_table,
    run_stem,
    write_checkpoint,
    write_explanations,
    write_json,
    write_run,
    write_table,
)

__all__ = [
    "list_runs",
    "read_checkpoint",
    "read_epochs",
    "read_json",
    "read_run",
    "read_table",
    "run_stem",
    "write_checkpoint",
    "write_explanations",
    "write_json",
    "write_run",
    "write_table",
]
