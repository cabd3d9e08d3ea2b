"""
backend/data/loaders/csv_loader.py
Load a tabular CSV into a Dataset: type inference, one-hot encoding, label mapping
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from backend.fairexp.utils.errors import ParseError, SchemaError

from ..dataset import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CsvSchema:
    """How to read labels, sensitive classes and features from a CSV."""

    label_column: str
    sensitive_column: str
    positive_label: str
    sensitive_mapping: Dict[str, int]
    categorical_columns: Optional[List[str]] = None
    numeric_columns: Optional[List[str]] = None
    drop_columns: List[str] = field(default_factory=list)
    include_sensitive_feature: bool = False

    @classmethod
    def from_dict(cls, data: Dict) -> "CsvSchema":
        try:
            mapping = {str(k): int(v) for k, v in data["sensitive_mapping"].items()}
            return cls(
                label_column=str(data["label_column"]),
                sensitive_column=str(data["sensitive_column"]),
                positive_label=str(data["positive_label"]),
                sensitive_mapping=mapping,
                categorical_columns=data.get("categorical_columns"),
                numeric_columns=data.get("numeric_columns"),
                drop_columns=list(data.get("drop_columns", [])),
                include_sensitive_feature=bool(
                    data.get("include_sensitive_feature", False)
                ),
            )
        except KeyError as exc:
            raise SchemaError(f"dataset schema is missing {exc.args[0]!r}") from exc


class CsvLoader:
    """
    Read a comma-separated, UTF-8 file with a header row.

    Feature columns are numeric or categorical: declared in the schema, otherwise
    numeric when at least half of their cells parse as numbers. Text cells in a
    numeric column are parse errors. Categorical columns are one-hot encoded
    with levels in first-appearance order and the first level dropped. Row
    numbers in errors count data rows from 0.
    """

    def __init__(self, schema: CsvSchema):
        self.schema = schema

    def read_frame(self, path) -> pd.DataFrame:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"dataset file not found: {path}")
        try:
            frame = pd.read_csv(
                path,
                dtype=str,
                keep_default_na=False,
                on_bad_lines="error",
                encoding="utf-8",
                skipinitialspace=True,
            )
        except pd.errors.ParserError as exc:
            raise SchemaError(f"rows have inconsistent arity: {exc}") from exc
        except pd.errors.EmptyDataError as exc:
            raise SchemaError(f"{path} is empty") from exc

        short = frame.isna().any(axis=1)
        if short.any():
            row = int(np.flatnonzero(short.to_numpy())[0])
            raise SchemaError(f"row {row} has fewer fields than the header")
        return frame.apply(lambda col: col.str.strip())

    def load(self, path) -> Dataset:
        schema = self.schema
        frame = self.read_frame(path)
        for column in (schema.label_column, schema.sensitive_column):
            if column not in frame.columns:
                raise SchemaError(f"column '{column}' not in header")
        if frame.empty:
            raise SchemaError("dataset has no rows")
        self._check_missing(frame)

        y = (frame[schema.label_column] == schema.positive_label).to_numpy(np.int64)
        s = self._sensitive(frame[schema.sensitive_column])
        n_sensitive = max(schema.sensitive_mapping.values()) + 1

        skip = {schema.label_column, schema.sensitive_column, *schema.drop_columns}
        blocks: List[np.ndarray] = []
        names: List[str] = []
        numeric: List[int] = []
        for column in frame.columns:
            if column in skip:
                continue
            values = frame[column]
            if self._is_categorical(column, values):
                levels = list(pd.unique(values))
                for level in levels[1:]:
                    blocks.append((values == level).to_numpy(np.float64))
                    names.append(f"{column}={level}")
            else:
                numeric.append(len(names))
                blocks.append(self._parse_numeric(values, column))
                names.append(column)

        if schema.include_sensitive_feature:
            numeric.append(len(names))
            blocks.append(s.astype(np.float64))
            names.append(schema.sensitive_column)
        if not blocks:
            raise SchemaError("no feature columns remain after encoding")

        logger.info(
            "loaded %s: %d rows, %d features, %d sensitive classes",
            path,
            len(frame),
            len(names),
            n_sensitive,
        )
        return Dataset(
            x=np.column_stack(blocks),
            y=y,
            s=s,
            feature_names=tuple(names),
            sensitive_name=schema.sensitive_column,
            n_sensitive=n_sensitive,
            numeric_columns=tuple(numeric),
        )

    @staticmethod
    def _check_missing(frame: pd.DataFrame):
        empty = frame == ""
        if empty.to_numpy().any():
            row, col = np.argwhere(empty.to_numpy())[0]
            raise ParseError("missing value", int(row), str(frame.columns[col]))

    def _is_categorical(self, column: str, values: pd.Series) -> bool:
        schema = self.schema
        if column in (schema.categorical_columns or ()):
            return True
        if column in (schema.numeric_columns or ()):
            return False
        numbers = pd.to_numeric(values, errors="coerce").to_numpy(np.float64)
        return 2 * int(np.isfinite(numbers).sum()) < len(values)

    @staticmethod
    def _parse_numeric(values: pd.Series, column: str) -> np.ndarray:
        parsed = pd.to_numeric(values, errors="coerce").to_numpy(np.float64)
        bad = ~np.isfinite(parsed)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            text = values.iloc[row]
            raise ParseError(f"cannot parse '{text}' as a number", row, column)
        return parsed

    def _sensitive(self, values: pd.Series) -> np.ndarray:
        mapping = self.schema.sensitive_mapping
        unknown = sorted(set(values) - set(mapping))
        if unknown:
            raise SchemaError(
                f"sensitive values {unknown} are not in the sensitive mapping"
            )
        s = values.map(mapping).to_numpy(np.int64)
        absent = sorted(set(range(max(mapping.values()) + 1)) - set(s.tolist()))
        if absent:
            raise SchemaError(f"sensitive classes {absent} do not occur in the data")
        return s


def load_csv(path, schema) -> Dataset:
    """Load ``path`` with a CsvSchema or a schema mapping."""
    if isinstance(schema, dict):
        schema = CsvSchema.from_dict(schema)
    return CsvLoader(schema).load(path)
