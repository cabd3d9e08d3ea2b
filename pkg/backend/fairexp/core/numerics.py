"""
backend/fairexp/core/numerics.py
Dense float64 matrices, seeded PCG64 generators and a finite-difference checker

Matrices are plain ``numpy.ndarray`` objects of dtype float64 and rank 2. Random
draws always come from ``numpy.random.Generator(PCG64(seed))``; PCG64 is a
64-bit permuted congruential generator whose stream is fixed by numpy for a
given seed on every platform.
"""

from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np

from ..utils.constants import GRAD_CHECK_STEP
from ..utils.errors import DimensionError, NumericError

Matrix = np.ndarray
Rng = np.random.Generator


def as_matrix(data, name: str = "matrix") -> Matrix:
    """Coerce ``data`` to a finite float64 matrix (1-D input becomes a column)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product with a shape check naming both operands."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul shape mismatch", a.shape, b.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.all(np.isfinite(out)):
        raise NumericError(
            f"matmul produced non-finite entries for shapes {a.shape} x {b.shape}"
        )
    return out


def make_rng(seed: int) -> Rng:
    """PCG64-backed generator; equal seeds give equal streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def child_rngs(seed: int, names: Sequence[str]) -> Dict[str, Rng]:
    """
    Independent named streams derived from one seed.

    Order of ``names`` fixes which spawned sequence each stream receives, so a
    caller always passes the same tuple.
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {
        name: np.random.Generator(np.random.PCG64(child))
        for name, child in zip(names, children)
    }


def grad_check(
    loss_fn: Callable[[np.ndarray], float],
    params: Iterable[float],
    analytic_grad: Iterable[float],
    h: Optional[float] = None,
) -> float:
    """
    Compare an analytic gradient against central differences.

    Returns max_i |central_i - analytic_i| / max(1, |analytic_i|).
    """
    h = GRAD_CHECK_STEP if h is None else float(h)
    if h <= 0:
        raise ValueError("grad_check step must be positive")
    theta = np.array(params, dtype=np.float64).ravel()
    analytic = np.array(analytic_grad, dtype=np.float64).ravel()
    if theta.shape != analytic.shape:
        raise DimensionError("gradient length mismatch", theta.shape, analytic.shape)

    worst = 0.0
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        up = float(loss_fn(theta.copy()))
        theta[i] = orig - h
        down = float(loss_fn(theta.copy()))
        theta[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(f"non-finite loss while probing coordinate {i}")
        central = (up - down) / (2.0 * h)
        err = abs(central - analytic[i]) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst
