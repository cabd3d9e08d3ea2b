"""
backend/fairexp/core/groups.py
Partition of a row set into (sensitive class, utility class) cells
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class SubgroupView:
    """
    Row positions of a viewed matrix grouped by (s, y).

    ``cells[(s, y)]`` holds positions into the viewed rows (not dataset indices),
    sorted ascending. Every sensitive class in ``range(n_sensitive)`` and every
    utility class in ``(0, 1)`` has an entry, possibly empty.
    """

    cells: Dict[Tuple[int, int], np.ndarray]
    n_sensitive: int
    n_rows: int
    utility_classes: Tuple[int, ...] = (0, 1)
    dataset_index: Optional[np.ndarray] = field(default=None, compare=False)

    @classmethod
    def from_labels(
        cls,
        y: Sequence[int],
        s: Sequence[int],
        n_sensitive: Optional[int] = None,
        dataset_index: Optional[Sequence[int]] = None,
    ) -> "SubgroupView":
        y = np.asarray(y, dtype=np.int64)
        s = np.asarray(s, dtype=np.int64)
        if y.shape != s.shape:
            raise ValueError(f"label lengths differ: {y.shape} vs {s.shape}")
        if n_sensitive is None:
            n_sensitive = int(s.max()) + 1 if s.size else 0
        cells = {}
        for sc in range(n_sensitive):
            for yc in (0, 1):
                cells[(sc, yc)] = np.flatnonzero((s == sc) & (y == yc))
        index = None if dataset_index is None else np.asarray(dataset_index)
        return cls(
            cells=cells,
            n_sensitive=int(n_sensitive),
            n_rows=int(y.size),
            dataset_index=index,
        )

    def cell(self, s: int, y: int) -> np.ndarray:
        return self.cells.get((s, y), np.empty(0, dtype=np.int64))

    def group(self, s: int) -> np.ndarray:
        """All rows of sensitive class ``s`` regardless of label."""
        return np.sort(np.concatenate([self.cell(s, y) for y in self.utility_classes]))

    def sensitive_pairs(self) -> List[Tuple[int, int]]:
        """Unordered pairs (a, b), a < b, of sensitive classes."""
        return [
            (a, b)
            for a in range(self.n_sensitive)
            for b in range(a + 1, self.n_sensitive)
        ]

    def counts(self) -> Dict[str, int]:
        """Cell sizes keyed ``"s=<s>,y=<y>"`` for reports."""
        return {
            f"s={s},y={y}": int(idx.size) for (s, y), idx in sorted(self.cells.items())
        }
