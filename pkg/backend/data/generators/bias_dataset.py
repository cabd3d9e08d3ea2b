"""
backend/data/generators/bias_dataset.py
Synthetic tabular data with a controllable label bias against one subgroup

Generative equations (all draws from the supplied PCG64 generator):

    s    ~ Bernoulli(0.5)
    x0   ~ N(0, 1),  x1 ~ N(0, 1)
    z    = x0 + x1 + N(0, 0.5^2)
    y0   = 1[z > 0]
    y    = 1       with probability ``bias`` when s = 0 and y0 = 0
           0       with probability ``bias`` when s = 1 and y0 = 1
           y0      otherwise
    x2   = s + N(0, 0.5^2)          (leaks the sensitive class)
    x3.. ~ N(0, 1)                  (noise)

P(y=1 | s=0) = (1 + bias) / 2 and P(y=1 | s=1) = (1 - bias) / 2, so the label
base-rate gap between the groups is ``bias``.
"""

import numpy as np

from backend.fairexp.core.numerics import Rng
from backend.fairexp.utils.constants import (
    SYNTHETIC_MIN_FEATURES,
    SYNTHETIC_MIN_ROWS,
    SYNTHETIC_NOISE,
)
from backend.fairexp.utils.errors import DomainError

from ..dataset import Dataset


def make_synthetic(n: int, d: int, bias: float, rng: Rng) -> Dataset:
    """Biased binary-classification data with a binary sensitive attribute."""
    if n < SYNTHETIC_MIN_ROWS:
        raise DomainError(f"synthetic data needs n >= {SYNTHETIC_MIN_ROWS}, got {n}")
    if d < SYNTHETIC_MIN_FEATURES:
        raise DomainError(
            f"synthetic data needs d >= {SYNTHETIC_MIN_FEATURES}, got {d}"
        )
    if not 0.0 <= bias <= 1.0:
        raise DomainError(f"bias must lie in [0, 1], got {bias}")

    s = (rng.random(n) < 0.5).astype(np.int64)
    x = rng.standard_normal((n, d))
    z = x[:, 0] + x[:, 1] + SYNTHETIC_NOISE * rng.standard_normal(n)
    y = (z > 0).astype(np.int64)

    flip = rng.random(n) < bias
    y = np.where(flip & (s == 0) & (y == 0), 1, y)
    y = np.where(flip & (s == 1) & (y == 1), 0, y)

    x[:, 2] = s + SYNTHETIC_NOISE * rng.standard_normal(n)

    return Dataset(
        x=x,
        y=y,
        s=s,
        feature_names=tuple(f"x{j}" for j in range(d)),
        sensitive_name="s",
        n_sensitive=2,
        numeric_columns=tuple(range(d)),
    )
