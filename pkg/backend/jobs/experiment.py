"""
backend/jobs/experiment.py
Experiment configuration: dataset source, split, seeds and the training grid
"""

import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

from backend.data.dataset import Dataset, Split, split
from backend.data.generators import make_synthetic
from backend.data.loaders import load_csv
from backend.fairexp.core.numerics import make_rng
from backend.fairexp.training.trainer import TrainConfig
from backend.fairexp.utils.constants import GRID_PRESETS
from backend.middleware.validation import ValidationError, validate_experiment

logger = logging.getLogger(__name__)

BASE_CELL = "base"
PRESET_METHODS = {"mlp": "vanilla", "cfa": "cfa", "reweight": "reweight"}


def format_value(value) -> str:
    """Compact, filename-safe rendering of a grid value."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:g}"
    if isinstance(value, dict):
        kind = str(value.get("kind", "sw"))
        rest = [f"{k}-{format_value(value[k])}" for k in sorted(value) if k != "kind"]
        return "+".join([kind, *rest])
    return str(value)


@dataclass(frozen=True)
class GridCell:
    """One point of the grid: the overrides applied on top of ``base``."""

    cell_id: str
    params: Dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Dict
    fractions: List[float]
    split_seed: int
    seeds: List[int]
    method: str = "cfa"
    base: Dict = field(default_factory=dict)
    grid: Dict[str, list] = field(default_factory=dict)
    selection: str = "mean"
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: Dict, base_dir=None) -> "ExperimentConfig":
        """Validate ``doc``; relative dataset paths resolve against ``base_dir``."""
        data = validate_experiment(doc)
        dataset = dict(data["dataset"])
        if dataset["kind"] == "csv" and base_dir is not None:
            path = Path(dataset["path"])
            if not path.is_absolute():
                dataset["path"] = str(Path(base_dir) / path)
        return cls(
            dataset=dataset,
            fractions=data["split"]["fractions"],
            split_seed=data["split"]["seed"],
            seeds=data["seeds"],
            method=data["method"],
            base=data["base"],
            grid=data["grid"],
            selection=data["selection"],
            output_dir=data["output_dir"],
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        return cls.from_dict(doc, base_dir=path.parent)

    # ── Overrides ──────────────────────────────────────────────────────────────

    def with_seeds(self, seeds: List[int]) -> "ExperimentConfig":
        return replace(self, seeds=list(seeds))

    def with_preset(self, name: str) -> "ExperimentConfig":
        """Fill an empty grid from a named preset and switch to its method."""
        if name not in GRID_PRESETS:
            choices = ", ".join(sorted(GRID_PRESETS))
            raise ValidationError(f"Invalid preset '{name}'. Must be one of: {choices}")
        if self.grid:
            logger.info("config grid given; preset '%s' ignored", name)
            return self
        grid = {k: list(GRID_PRESETS[name][k]) for k in sorted(GRID_PRESETS[name])}
        return replace(self, grid=grid, method=PRESET_METHODS[name])

    def with_lambdas(self, lambdas: List[float]) -> "ExperimentConfig":
        """A CFA experiment whose only grid field is ``lam``."""
        return replace(self, grid={"lam": list(lambdas)}, method="cfa")

    # ── Grid ───────────────────────────────────────────────────────────────────

    def cells(self) -> List[GridCell]:
        """Cartesian product of the grid in sorted field order."""
        if not self.grid:
            return [GridCell(BASE_CELL, {})]
        names = sorted(self.grid)
        out = []
        for values in itertools.product(*(self.grid[n] for n in names)):
            params = dict(zip(names, values))
            cell_id = "__".join(f"{n}={format_value(v)}" for n, v in params.items())
            out.append(GridCell(cell_id, params))
        ids = [c.cell_id for c in out]
        if len(set(ids)) != len(ids):
            raise ValidationError("grid lists contain duplicate values")
        return out

    def is_singleton(self) -> bool:
        return all(len(values) == 1 for values in self.grid.values())

    def train_config(
        self, cell: GridCell, seed: int, distance: Optional[str] = None
    ) -> TrainConfig:
        options = {**self.base, **cell.params, "seed": seed}
        if distance is not None:
            current = options.get("distance")
            if isinstance(current, dict):
                options["distance"] = dict(current, kind=distance)
            else:
                options["distance"] = distance
        return TrainConfig.from_dict(options)

    # ── Data ───────────────────────────────────────────────────────────────────

    def load_dataset(self) -> Dataset:
        spec = self.dataset
        if spec["kind"] == "synthetic":
            return make_synthetic(
                spec["n"], spec["d"], spec["bias"], make_rng(spec["seed"])
            )
        return load_csv(spec["path"], spec)

    def make_split(self, ds: Dataset) -> Split:
        """One stratified split, shared by every cell and seed."""
        return split(ds, self.fractions, make_rng(self.split_seed))

    def resolve_output(self, out: Optional[str] = None) -> Path:
        target = out or self.output_dir
        if not target:
            raise ValidationError("no output directory: pass --out or set output_dir")
        path = Path(target)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ValidationError(f"output directory {path} is not writable") from exc
        return path

    def to_dict(self) -> Dict:
        return {
            "dataset": self.dataset,
            "split": {"fractions": self.fractions, "seed": self.split_seed},
            "seeds": self.seeds,
            "method": self.method,
            "base": self.base,
            "grid": self.grid,
            "selection": self.selection,
        }
