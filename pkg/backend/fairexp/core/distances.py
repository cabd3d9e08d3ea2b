"""
backend/fairexp/core/distances.py
Subgroup distances over hidden representations: sliced Wasserstein, Cosine, KL, MSE

Every pairwise kernel returns ``(value, grad_a, grad_b)`` so the model can push
the distance terms back into the encoder. Sampling (row draws, SW slice
directions, SW padding) happens once per optimisation step in a
``DistancePlan`` and is reused for the raw and masked representations and for
the backward pass.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..utils.constants import (
    DEFAULT_DISTANCE,
    DISTANCE_EPS,
    DISTANCE_KINDS,
    SAMPLE_CAP,
    SW_SLICES,
)
from ..utils.errors import ConfigurationError, DimensionError, DomainError
from .groups import SubgroupView
from .numerics import Matrix, Rng

PairResult = Tuple[float, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class DistanceSpec:
    """Which distance to use and how to sample subgroups for it."""

    kind: str = DEFAULT_DISTANCE
    n_samples: Optional[int] = None  # None: min(|A|, |B|, SAMPLE_CAP) per pair
    slices: int = SW_SLICES
    eps: float = DISTANCE_EPS
    class_conditioned: bool = True
    per_row_cosine: bool = False

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind not in DISTANCE_KINDS:
            raise ConfigurationError(
                f"Unknown distance '{self.kind}'. Must be one of: "
                f"{', '.join(DISTANCE_KINDS)}"
            )
        if self.n_samples is not None and int(self.n_samples) < 1:
            raise ConfigurationError("n_samples must be at least 1")
        if int(self.slices) < 1:
            raise ConfigurationError("slices must be at least 1")
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")

    @classmethod
    def from_config(cls, value) -> "DistanceSpec":
        """Accept a kind string, a mapping of fields, or a spec."""
        if isinstance(value, DistanceSpec):
            return value
        if isinstance(value, str):
            return cls(kind=value)
        if isinstance(value, dict):
            return cls(**value)
        raise ConfigurationError(f"Cannot build a distance from {value!r}")

    def to_dict(self) -> Dict:
        return asdict(self)


def _check_pair(a: Matrix, b: Matrix, same_rows: bool = True):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError("distance operands differ in width", a.shape, b.shape)
    if same_rows and a.shape[0] != b.shape[0]:
        raise DimensionError("distance operands differ in rows", a.shape, b.shape)


def unit_directions(n: int, width: int, rng: Rng) -> np.ndarray:
    """``n`` random unit vectors (rows) in R^width."""
    v = rng.standard_normal((n, width))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


# ── Pairwise kernels (value + gradient) ────────────────────────────────────────


def _sw(a: Matrix, b: Matrix, directions: np.ndarray) -> PairResult:
    """Sum over slices of the mean squared gap between sorted projections."""
    n = a.shape[0]
    pa = a @ directions.T  # (n, I)
    pb = b @ directions.T
    oa = np.argsort(pa, axis=0, kind="stable")
    ob = np.argsort(pb, axis=0, kind="stable")
    diff = np.take_along_axis(pa, oa, axis=0) - np.take_along_axis(pb, ob, axis=0)
    value = float(np.sum(diff**2) / n)

    g_pa = np.zeros_like(pa)
    g_pb = np.zeros_like(pb)
    np.put_along_axis(g_pa, oa, 2.0 * diff / n, axis=0)
    np.put_along_axis(g_pb, ob, -2.0 * diff / n, axis=0)
    return value, g_pa @ directions, g_pb @ directions


def _cosine(a: Matrix, b: Matrix, eps: float) -> PairResult:
    n = a.shape[0]
    dots = np.sum(a * b, axis=1)
    sq_a = float(np.sum(a * a))
    sq_b = float(np.sum(b * b))
    den = max(sq_a, sq_b, eps)
    total = float(np.sum(np.abs(dots)))
    value = -total / (n * den)

    sign = np.sign(dots)[:, None]
    ga = -(sign * b) / (n * den)
    gb = -(sign * a) / (n * den)
    # max() picks a; the eps branch is constant
    if den == sq_a and sq_a >= eps:
        ga = ga + (total / (n * den**2)) * 2.0 * a
    elif den == sq_b and sq_b >= eps:
        gb = gb + (total / (n * den**2)) * 2.0 * b
    return value, ga, gb


def _cosine_rowwise(a: Matrix, b: Matrix, eps: float) -> PairResult:
    n = a.shape[0]
    dots = np.sum(a * b, axis=1)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    raw = na * nb
    den = np.maximum(raw, eps)
    value = -float(np.sum(np.abs(dots) / den)) / n

    sign = np.sign(dots)[:, None]
    ga = -(sign * b) / den[:, None]
    gb = -(sign * a) / den[:, None]
    live = raw >= eps
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(live, np.abs(dots) / den**2, 0.0)[:, None]
        ua = np.where(live[:, None], a * (nb / np.where(na > 0, na, 1.0))[:, None], 0.0)
        ub = np.where(live[:, None], b * (na / np.where(nb > 0, nb, 1.0))[:, None], 0.0)
    ga = ga + coef * ua
    gb = gb + coef * ub
    return value, ga / n, gb / n


def _normalize_rows(m: Matrix, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    if np.any(m < 0):
        raise DomainError("KL distance needs nonnegative representations")
    u = m + eps
    total = np.sum(u, axis=1, keepdims=True)
    return u / total, total


def _kl(a: Matrix, b: Matrix, eps: float) -> PairResult:
    n = a.shape[0]
    p, sp = _normalize_rows(a, eps)
    q, sq = _normalize_rows(b, eps)
    log_ratio = np.log(p) - np.log(q)
    value = float(np.sum(p * log_ratio)) / n

    g_p = (log_ratio + 1.0) / n
    g_q = -(p / q) / n
    ga = (g_p - np.sum(g_p * p, axis=1, keepdims=True)) / sp
    gb = (g_q - np.sum(g_q * q, axis=1, keepdims=True)) / sq
    return value, ga, gb


def _mse(a: Matrix, b: Matrix) -> PairResult:
    n = a.shape[0]
    diff = a - b
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        return 0.0, np.zeros_like(a), np.zeros_like(b)
    g = diff / (n * norm)
    return norm / n, g, -g


def pair_distance(
    kind: str,
    a: Matrix,
    b: Matrix,
    eps: float = DISTANCE_EPS,
    directions: Optional[np.ndarray] = None,
    per_row_cosine: bool = False,
) -> PairResult:
    """Dispatch to one kernel; SW needs ``directions`` and equal row counts."""
    _check_pair(a, b)
    if kind == "sw":
        if directions is None:
            raise ConfigurationError("SW distance needs slice directions")
        return _sw(a, b, directions)
    if kind == "cosine":
        return _cosine_rowwise(a, b, eps) if per_row_cosine else _cosine(a, b, eps)
    if kind == "kl":
        return _kl(a, b, eps)
    if kind == "mse":
        return _mse(a, b)
    raise ConfigurationError(f"Unknown distance '{kind}'")


# ── Public pairwise distances ──────────────────────────────────────────────────


def _pad_rows(n_have: int, n_want: int, rng: Rng) -> np.ndarray:
    """Original rows followed by rows resampled with replacement up to n_want."""
    extra = rng.integers(0, n_have, size=n_want - n_have)
    return np.concatenate([np.arange(n_have), extra])


def sw_distance(
    h0: Matrix,
    h1: Matrix,
    slices: int = SW_SLICES,
    rng: Optional[Rng] = None,
    directions: Optional[np.ndarray] = None,
) -> float:
    """
    Sliced Wasserstein distance between two point clouds.

    The smaller set is padded to the larger size by resampling its rows with
    replacement. Pass ``directions`` (I x d rows) to fix the slices.
    """
    _check_pair(h0, h1, same_rows=False)
    if h0.shape[0] == 0 or h1.shape[0] == 0:
        raise DomainError("SW distance of an empty set")
    if directions is None:
        if rng is None:
            raise ConfigurationError("SW distance needs an rng or fixed directions")
        directions = unit_directions(int(slices), h0.shape[1], rng)
    n = max(h0.shape[0], h1.shape[0])
    if h0.shape[0] != h1.shape[0] and rng is None:
        raise ConfigurationError("SW distance of unequal sets needs an rng for padding")
    a, b = h0, h1
    if h0.shape[0] < n:
        a = h0[_pad_rows(h0.shape[0], n, rng)]
    elif h1.shape[0] < n:
        b = h1[_pad_rows(h1.shape[0], n, rng)]
    return _sw(a, b, np.asarray(directions, dtype=np.float64))[0]


def cosine_distance(
    h0s: Matrix, h1s: Matrix, eps: float = DISTANCE_EPS, per_row: bool = False
) -> float:
    """Negative mean absolute row dot product over the larger squared norm."""
    return pair_distance("cosine", h0s, h1s, eps=eps, per_row_cosine=per_row)[0]


def kl_distance(h0s: Matrix, h1s: Matrix, eps: float = DISTANCE_EPS) -> float:
    """Mean row KL divergence after eps-shift and row normalization."""
    return pair_distance("kl", h0s, h1s, eps=eps)[0]


def mse_distance(h0s: Matrix, h1s: Matrix) -> float:
    """Frobenius norm of the difference divided by the row count."""
    return pair_distance("mse", h0s, h1s)[0]


# ── Subgroup distance ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PairTerm:
    """One weighted pairwise comparison between two row sets of H."""

    weight: float
    rows_a: np.ndarray
    rows_b: np.ndarray
    label: str


@dataclass(frozen=True)
class DistancePlan:
    """Sampled comparisons for one optimisation step."""

    spec: DistanceSpec
    terms: Tuple[PairTerm, ...]
    directions: Optional[np.ndarray]

    @classmethod
    def draw(
        cls, groups: SubgroupView, spec: DistanceSpec, width: int, rng: Rng
    ) -> "DistancePlan":
        """Fix row samples and slice directions for ``groups``."""
        if groups.n_sensitive < 2:
            raise DomainError("subgroup distance needs at least two sensitive classes")
        pairs = groups.sensitive_pairs()
        if spec.class_conditioned:
            blocks = []
            for y in groups.utility_classes:
                sets = {}
                for s in range(groups.n_sensitive):
                    rows = groups.cell(s, y)
                    if rows.size == 0:
                        raise DomainError(f"empty subgroup cell (y={y}, s={s})")
                    sets[s] = rows
                blocks.append((f"y={y}", sets))
        else:
            sets = {}
            for s in range(groups.n_sensitive):
                rows = groups.group(s)
                if rows.size == 0:
                    raise DomainError(f"empty subgroup (s={s})")
                sets[s] = rows
            blocks = [("all", sets)]

        weight = 1.0 / (len(blocks) * len(pairs))
        terms: List[PairTerm] = []
        for label, sets in blocks:
            for a, b in pairs:
                rows_a, rows_b = _sample_pair(sets[a], sets[b], spec, rng)
                terms.append(PairTerm(weight, rows_a, rows_b, f"{label},s={a}|s={b}"))

        directions = None
        if spec.kind == "sw":
            directions = unit_directions(int(spec.slices), width, rng)
        return cls(spec=spec, terms=tuple(terms), directions=directions)

    def evaluate(self, h: Matrix) -> Tuple[float, np.ndarray]:
        """Weighted distance over all terms and its gradient with respect to h."""
        grad = np.zeros_like(h)
        total = 0.0
        for term in self.terms:
            value, ga, gb = pair_distance(
                self.spec.kind,
                h[term.rows_a],
                h[term.rows_b],
                eps=self.spec.eps,
                directions=self.directions,
                per_row_cosine=self.spec.per_row_cosine,
            )
            total += term.weight * value
            np.add.at(grad, term.rows_a, term.weight * ga)
            np.add.at(grad, term.rows_b, term.weight * gb)
        return total, grad


def _sample_pair(
    rows_a: np.ndarray, rows_b: np.ndarray, spec: DistanceSpec, rng: Rng
) -> Tuple[np.ndarray, np.ndarray]:
    if spec.kind == "sw":
        n = max(rows_a.size, rows_b.size)
        if rows_a.size < n:
            rows_a = rows_a[_pad_rows(rows_a.size, n, rng)]
        elif rows_b.size < n:
            rows_b = rows_b[_pad_rows(rows_b.size, n, rng)]
        return rows_a, rows_b
    n_s = spec.n_samples or min(rows_a.size, rows_b.size, SAMPLE_CAP)
    pick_a = rows_a[rng.integers(0, rows_a.size, size=n_s)]
    pick_b = rows_b[rng.integers(0, rows_b.size, size=n_s)]
    return pick_a, pick_b


def subgroup_distance(
    h: Matrix,
    groups: SubgroupView,
    spec: DistanceSpec,
    rng: Optional[Rng] = None,
    plan: Optional[DistancePlan] = None,
) -> float:
    """
    Mean pairwise subgroup distance of ``h``.

    Class-conditioned: mean over utility classes of the mean over unordered
    sensitive pairs within that class. Unconditioned: mean over pairs of whole
    subgroups.
    """
    if groups.n_rows != h.shape[0]:
        raise DimensionError(
            "view and representation row counts differ", (groups.n_rows,), h.shape
        )
    if plan is None:
        if rng is None:
            raise ConfigurationError("subgroup_distance needs an rng or a plan")
        plan = DistancePlan.draw(groups, spec, h.shape[1], rng)
    return plan.evaluate(h)[0]
