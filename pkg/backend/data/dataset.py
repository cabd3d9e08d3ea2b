"""
backend/data/dataset.py
Dataset container, train-split z-score normalization and stratified splitting
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from backend.fairexp.core.groups import SubgroupView
from backend.fairexp.core.numerics import Matrix, Rng
from backend.fairexp.utils.constants import SPLIT_FRACTIONS
from backend.fairexp.utils.errors import (
    ConfigurationError,
    DimensionError,
    SchemaError,
    StratificationError,
)

PARTS = ("train", "val", "test")


@dataclass(frozen=True)
class Normalizer:
    """z-score parameters of the numeric feature columns."""

    columns: Tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: Matrix, columns: Sequence[int]) -> "Normalizer":
        cols = tuple(int(c) for c in columns)
        if not cols:
            return cls((), np.zeros(0), np.zeros(0))
        block = x[:, cols]
        mean = block.mean(axis=0)
        std = block.std(axis=0)
        std[std == 0] = 1.0
        return cls(cols, mean, std)

    def transform(self, x: Matrix) -> Matrix:
        out = np.array(x, dtype=np.float64, copy=True)
        if self.columns:
            out[:, self.columns] = (out[:, self.columns] - self.mean) / self.std
        return out

    def inverse(self, x: Matrix) -> Matrix:
        out = np.array(x, dtype=np.float64, copy=True)
        if self.columns:
            out[:, self.columns] = out[:, self.columns] * self.std + self.mean
        return out

    def to_dict(self) -> Dict:
        return {
            "columns": list(self.columns),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Normalizer":
        return cls(
            tuple(data["columns"]), np.array(data["mean"]), np.array(data["std"])
        )


@dataclass(frozen=True)
class Dataset:
    """Features, binary utility labels and sensitive classes of N instances."""

    x: Matrix
    y: np.ndarray
    s: np.ndarray
    feature_names: Tuple[str, ...]
    sensitive_name: str
    n_sensitive: int
    numeric_columns: Tuple[int, ...] = ()
    normalizer: Optional[Normalizer] = field(default=None, compare=False)

    def __post_init__(self):
        n = self.x.shape[0]
        if self.y.shape[0] != n or self.s.shape[0] != n:
            raise DimensionError("dataset lengths differ", self.x.shape, self.y.shape)
        if self.x.shape[1] < 1:
            raise SchemaError("dataset needs at least one feature")
        if len(self.feature_names) != self.x.shape[1]:
            raise SchemaError("feature_names do not match the feature count")
        if not np.isin(self.y, (0, 1)).all():
            raise SchemaError("utility labels must be 0 or 1")
        present = set(np.unique(self.s).tolist())
        missing = [c for c in range(self.n_sensitive) if c not in present]
        if missing:
            raise SchemaError(f"sensitive classes absent from data: {missing}")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def normalized(self, split: "Split") -> "Dataset":
        """Copy with numeric columns z-scored by train-part statistics."""
        norm = Normalizer.fit(self.x[split.train], self.numeric_columns)
        return replace(self, x=norm.transform(self.x), normalizer=norm)

    def subgroups(self, indices: Optional[Sequence[int]] = None) -> SubgroupView:
        """(s, y) cells over ``indices``; positions are relative to ``indices``."""
        idx = np.arange(self.n) if indices is None else np.asarray(indices)
        return SubgroupView.from_labels(
            self.y[idx], self.s[idx], self.n_sensitive, dataset_index=idx
        )


@dataclass(frozen=True)
class Split:
    """Disjoint, exhaustive train/val/test index sets (each sorted)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def part(self, name: str) -> np.ndarray:
        if name not in PARTS:
            raise ConfigurationError(f"Unknown split part '{name}'")
        return getattr(self, name)

    def sizes(self) -> Dict[str, int]:
        return {name: int(self.part(name).size) for name in PARTS}


def _part_counts(n: int, fractions: Sequence[float]) -> List[int]:
    """Largest-remainder apportionment of n with every part at least 1."""
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r + 1e-9)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    for i in range(len(counts)):
        if counts[i] == 0:
            donor = max(range(len(counts)), key=lambda j: (counts[j], -j))
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split(
    ds: Dataset,
    fractions: Sequence[float] = SPLIT_FRACTIONS,
    rng: Optional[Rng] = None,
) -> Split:
    """
    Stratified split on the joint (y, s) cell.

    Every cell is shuffled and apportioned separately, so each part receives at
    least one member of every non-empty cell. Cells with fewer than three
    members cannot be represented in all parts.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3 or min(fractions) <= 0:
        raise ConfigurationError("split fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must sum to 1, got {sum(fractions)}")
    if rng is None:
        raise ConfigurationError("split needs an rng")

    parts: List[List[np.ndarray]] = [[], [], []]
    for c in range(ds.n_sensitive):
        for label in (0, 1):
            cell = np.flatnonzero((ds.s == c) & (ds.y == label))
            if cell.size == 0:
                continue
            if cell.size < len(PARTS):
                raise StratificationError(
                    f"cell (y={label}, s={c}) has {cell.size} member(s); "
                    f"at least {len(PARTS)} are needed"
                )
            shuffled = rng.permutation(cell)
            start = 0
            for p, count in enumerate(_part_counts(cell.size, fractions)):
                parts[p].append(shuffled[start : start + count])
                start += count

    train, val, test = (np.sort(np.concatenate(chunks)) for chunks in parts)
    return Split(train=train, val=val, test=test)
