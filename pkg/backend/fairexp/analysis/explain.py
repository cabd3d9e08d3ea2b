"""
backend/fairexp/analysis/explain.py
Local explainers, top-k feature masks and fidelity of explanations
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import Lasso
from sklearn.neighbors import NearestNeighbors

from ..core.model import MlpModel, input_gradient, predict_proba
from ..core.numerics import Matrix
from ..utils.constants import (
    DECISION_THRESHOLD,
    EXPLAINERS,
    FIDELITY_VARIANTS,
    HSIC_NEIGHBORS,
    HSIC_PENALTY,
    LASSO_MAX_SWEEPS,
    LASSO_TOL,
)
from ..utils.errors import ConfigurationError, DimensionError, DomainError

logger = logging.getLogger(__name__)

_DEGENERATE = 1e-12


@dataclass(frozen=True)
class Explanation:
    """Nonnegative per-feature importances, one row per instance."""

    importance: Matrix
    explainer_id: str


@dataclass(frozen=True)
class Mask:
    """Binary keep-matrix with exactly ``k`` zeros per row."""

    m: Matrix
    k: int

    def apply(self, x: Matrix) -> Matrix:
        return x * self.m


@dataclass(frozen=True)
class FidelityRecord:
    values: np.ndarray
    variant: str


# ── Gradient saliency ──────────────────────────────────────────────────────────


def explain_gradient(model: MlpModel, x: Matrix) -> Explanation:
    """|x * d y_prob / d x| for every instance and feature."""
    x = np.asarray(x, dtype=np.float64)
    return Explanation(np.abs(x * input_gradient(model, x)), "gradient")


# ── HSIC Lasso ─────────────────────────────────────────────────────────────────


def _centered_kernel(values: np.ndarray) -> Optional[np.ndarray]:
    """
    Gaussian kernel of a 1-D sample, double-centered and Frobenius-normalized.

    Bandwidth is the median pairwise distance (mean of nonzero distances when the
    median is zero). Returns None for a constant sample.
    """
    dists = pdist(values.reshape(-1, 1))
    nonzero = dists[dists > 0]
    if nonzero.size == 0:
        return None
    sigma = float(np.median(dists))
    if sigma <= 0:
        sigma = float(nonzero.mean())
    k = np.exp(-(squareform(dists) ** 2) / (2.0 * sigma**2))
    k = k - k.mean(axis=0, keepdims=True) - k.mean(axis=1, keepdims=True) + k.mean()
    norm = np.linalg.norm(k)
    if norm < _DEGENERATE:
        return None
    return k / norm


def nonnegative_lasso(
    design: np.ndarray,
    target: np.ndarray,
    penalty: float,
    tol: float = LASSO_TOL,
    max_sweeps: int = LASSO_MAX_SWEEPS,
) -> np.ndarray:
    """
    Coordinate-descent solution of
    min 1/2 ||target - design b||^2 + penalty * sum(b), b >= 0.

    sklearn scales the squared error by 1 / n_samples, so the penalty is too.
    """
    n_samples = design.shape[0]
    lasso = Lasso(
        alpha=penalty / n_samples,
        fit_intercept=False,
        positive=True,
        tol=tol,
        max_iter=max_sweeps,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        lasso.fit(design, target)
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        logger.debug("lasso stopped at %d sweeps without converging", max_sweeps)
    return np.asarray(lasso.coef_, dtype=np.float64)


class HsicLassoExplainer:
    """
    Local surrogate explainer on nearest-neighbor neighborhoods.

    Each explained instance gets a neighborhood of ``n_neighbors`` rows: itself
    plus its Euclidean-nearest rows of ``reference``. Keep ``n_neighbors`` at
    least the feature count so every kernel sees enough variation.
    """

    def __init__(
        self,
        model: MlpModel,
        reference: Matrix,
        n_neighbors: int = HSIC_NEIGHBORS,
        lasso_penalty: float = HSIC_PENALTY,
    ):
        self.model = model
        self.reference = np.asarray(reference, dtype=np.float64)
        if self.reference.shape[1] != model.n_features:
            raise DimensionError(
                "reference width", (model.n_features,), self.reference.shape
            )
        self.n_neighbors = int(n_neighbors)
        if self.n_neighbors < 2:
            raise ConfigurationError("n_neighbors must be at least 2")
        self.lasso_penalty = float(lasso_penalty)
        n_fit = min(self.n_neighbors, self.reference.shape[0])
        self._index = NearestNeighbors(n_neighbors=n_fit).fit(self.reference)

    def neighborhood(
        self, point: np.ndarray, self_row: Optional[int] = None
    ) -> np.ndarray:
        """
        ``point`` followed by its nearest reference rows.

        ``self_row`` is the reference index of ``point`` when it is drawn from the
        reference; only that row is skipped, exact duplicates stay.
        """
        point = np.asarray(point, dtype=np.float64).reshape(1, -1)
        _, idx = self._index.kneighbors(point)
        rows = [int(r) for r in idx[0] if self_row is None or r != self_row]
        rows = rows[: self.n_neighbors - 1]
        return np.vstack([point, self.reference[rows]])

    def explain_point(
        self, point: np.ndarray, self_row: Optional[int] = None
    ) -> np.ndarray:
        hood = self.neighborhood(point, self_row)
        d = hood.shape[1]
        coef = np.zeros(d)
        target = _centered_kernel(predict_proba(self.model, hood))
        if target is None:
            return coef

        live = []
        kernels = []
        for j in range(d):
            kj = _centered_kernel(hood[:, j])
            if kj is not None:
                live.append(j)
                kernels.append(kj.ravel())
        if not live:
            return coef
        design = np.column_stack(kernels)  # (n^2, n_live)
        coef[live] = nonnegative_lasso(design, target.ravel(), self.lasso_penalty)
        return coef

    def explain(self, x: Matrix, x_is_reference: bool = False) -> Explanation:
        """Explain every row of ``x``; row i is reference row i when flagged."""
        x = np.asarray(x, dtype=np.float64)
        rows = [
            self.explain_point(row, i if x_is_reference else None)
            for i, row in enumerate(x)
        ]
        importance = np.vstack(rows) if rows else np.zeros((0, x.shape[1]))
        return Explanation(importance, "hsic")


def explain_hsic_lasso(
    model: MlpModel,
    x: Matrix,
    instance: int,
    n_neighbors: int = HSIC_NEIGHBORS,
    lasso_penalty: float = HSIC_PENALTY,
    reference: Optional[Matrix] = None,
) -> np.ndarray:
    """Importances of ``x[instance]``, neighbors drawn from ``reference`` or ``x``."""
    x = np.asarray(x, dtype=np.float64)
    pool = x if reference is None else reference
    explainer = HsicLassoExplainer(model, pool, n_neighbors, lasso_penalty)
    self_row = instance if pool is x else None
    return explainer.explain_point(x[instance], self_row)


def explain(
    model: MlpModel,
    x: Matrix,
    method: str = "gradient",
    reference: Optional[Matrix] = None,
    n_neighbors: int = HSIC_NEIGHBORS,
    lasso_penalty: float = HSIC_PENALTY,
) -> Explanation:
    """Dispatch to a named explainer."""
    if method == "gradient":
        return explain_gradient(model, x)
    if method == "hsic":
        pool = x if reference is None else reference
        explainer = HsicLassoExplainer(model, pool, n_neighbors, lasso_penalty)
        return explainer.explain(x, x_is_reference=pool is x)
    raise ConfigurationError(
        f"Unknown explainer '{method}'. Must be one of: {', '.join(EXPLAINERS)}"
    )


# ── Masks and fidelity ─────────────────────────────────────────────────────────


def build_mask(exp: Union[Explanation, Matrix], k: int) -> Mask:
    """Zero the k most important features of each row; ties go to lower indices."""
    importance = exp.importance if isinstance(exp, Explanation) else exp
    importance = np.asarray(importance, dtype=np.float64)
    d = importance.shape[1]
    if not 1 <= k < d:
        raise DomainError(f"mask size k={k} must satisfy 1 <= k < d={d}")
    order = np.argsort(-importance, axis=1, kind="stable")
    m = np.ones_like(importance)
    np.put_along_axis(m, order[:, :k], 0.0, axis=1)
    return Mask(m, int(k))


def _true_class_prob(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.where(y == 1, p, 1.0 - p)


def _correct(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    return ((p >= DECISION_THRESHOLD).astype(np.int64) == y).astype(np.float64)


def fidelity(
    model: MlpModel,
    x: Matrix,
    mask: Union[Mask, Matrix],
    y: Sequence[int],
    variant: str = "accuracy",
) -> FidelityRecord:
    """Prediction performance on x minus performance on the masked x."""
    x = np.asarray(x, dtype=np.float64)
    m = mask.m if isinstance(mask, Mask) else np.asarray(mask, dtype=np.float64)
    if m.shape != x.shape:
        raise DimensionError("mask shape", x.shape, m.shape)
    y = np.asarray(y, dtype=np.int64)
    p = predict_proba(model, x)
    p_masked = predict_proba(model, x * m)

    if variant == "probability":
        values = _true_class_prob(p, y) - _true_class_prob(p_masked, y)
    elif variant == "accuracy":
        values = _correct(p, y) - _correct(p_masked, y)
    else:
        raise ConfigurationError(
            f"Unknown fidelity '{variant}'. "
            f"Must be one of: {', '.join(FIDELITY_VARIANTS)}"
        )
    return FidelityRecord(values, variant)
