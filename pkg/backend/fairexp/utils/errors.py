"""
backend/fairexp/utils/errors.py
Exception hierarchy shared by the library, the data loaders and the CLI
"""

from typing import Dict, Optional


class FairExpError(Exception):
    """Base class for every error raised by fairexp."""


class DimensionError(FairExpError, ValueError):
    """Operand shapes do not chain."""

    def __init__(self, message: str, left=None, right=None):
        if left is not None and right is not None:
            message = f"{message}: {tuple(left)} vs {tuple(right)}"
        super().__init__(message)
        self.left = left
        self.right = right


class NumericError(FairExpError, ArithmeticError):
    """A loss or gradient stopped being finite."""

    def __init__(
        self, message: str, block: Optional[str] = None, epoch: Optional[int] = None
    ):
        if block is not None:
            message = f"{message} (block {block})"
        if epoch is not None:
            message = f"{message} at epoch {epoch}"
        super().__init__(message)
        self.block = block
        self.epoch = epoch


class DomainError(FairExpError, ValueError):
    """Input outside the domain an operation is defined on."""

    def __init__(self, message: str, partial: Optional[Dict] = None):
        super().__init__(message)
        self.partial = partial or {}


class StratificationError(DomainError):
    """A (y, s) cell is too small to be represented in every split part."""


class ConfigurationError(FairExpError, ValueError):
    """Configuration is inconsistent with the requested computation."""


class SchemaError(ConfigurationError):
    """Dataset schema does not match the file contents."""


class ParseError(ConfigurationError):
    """A CSV cell could not be parsed."""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"{message} (row {row}, column '{column}')")
        self.row = row
        self.column = column
