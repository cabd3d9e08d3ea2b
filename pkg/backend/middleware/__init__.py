"""
backend/middleware/__init__.py
Configuration validation, logging setup and error handling for the command line
"""

from .error_handler import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    ErrorHandler,
    default_parallel,
    setup_logging,
)
from .validation import (
    ValidationError,
    validate_dataset,
    validate_distance,
    validate_experiment,
    validate_fractions,
    validate_grid,
    validate_lambdas,
    validate_method,
    validate_parallel,
    validate_seeds,
    validate_train_options,
)

__all__ = [
    "ValidationError",
    "validate_dataset",
    "validate_distance",
    "validate_experiment",
    "validate_fractions",
    "validate_grid",
    "validate_lambdas",
    "validate_method",
    "validate_parallel",
    "validate_seeds",
    "validate_train_options",
    "ErrorHandler",
    "setup_logging",
    "default_parallel",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERIC",
]
