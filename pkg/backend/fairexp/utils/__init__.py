"""backend/fairexp/utils/__init__.py"""
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    FairExpError,
    NumericError,
    ParseError,
    SchemaError,
    StratificationError,
)

__all__ = [
    "FairExpError",
    "DimensionError",
    "NumericError",
    "DomainError",
    "StratificationError",
    "ConfigurationError",
    "SchemaError",
    "ParseError",
]
