"""
backend/fairexp/analysis/fairmetrics.py
Utility, traditional fairness and explanation fairness metrics plus the overall Score

All gaps are computed on the [0, 1] scale. ``FairnessReport.to_dict`` scales
them to percentages for tables.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import accuracy_score, f1_score, roc_auc_score

from ..utils.constants import (
    DECISION_THRESHOLD,
    MULTI_CLASS_MODES,
    REPORT_METRICS,
    REPORT_SCALE,
    TOP_K_PERCENT,
    VEF_SCOPES,
)
from ..utils.errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class EqScores:
    """Explanation quality per instance and its global top-K labelling."""

    eq: np.ndarray
    k_percent: float
    q_hat: np.ndarray
    top_k_set: np.ndarray


def _n_classes(s: np.ndarray, n_classes: Optional[int]) -> int:
    if n_classes is not None:
        return int(n_classes)
    return max(2, int(s.max()) + 1) if s.size else 2


def _per_class(
    values: np.ndarray, s: np.ndarray, n_classes: int, what: str
) -> List[float]:
    out = []
    for c in range(n_classes):
        members = values[s == c]
        if members.size == 0:
            raise DomainError(f"{what}: sensitive class {c} is empty")
        out.append(float(members.mean()))
    return out


def multi_class_gap(
    per_class_values: Sequence[float], mode: str = "max_pairwise"
) -> float:
    """Spread of per-class values: population variance or largest pairwise gap."""
    values = np.asarray(per_class_values, dtype=np.float64)
    if values.size < 2:
        raise DomainError("a gap needs at least two sensitive classes")
    if mode == "variance":
        if np.ptp(values) == 0.0:
            return 0.0
        return float(np.var(values))
    if mode == "max_pairwise":
        return float(values.max() - values.min())
    raise ConfigurationError(
        f"Unknown multi-class mode '{mode}'. "
        f"Must be one of: {', '.join(MULTI_CLASS_MODES)}"
    )


def _gap(per_class: List[float], mode: str) -> float:
    if len(per_class) == 2:
        return abs(per_class[0] - per_class[1])
    return multi_class_gap(per_class, mode)


# ── Traditional fairness ───────────────────────────────────────────────────────


def positive_rates(y_hat, s, n_classes: Optional[int] = None) -> List[float]:
    s = np.asarray(s, dtype=np.int64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    return _per_class(y_hat, s, _n_classes(s, n_classes), "statistical parity")


def true_positive_rates(y_hat, y, s, n_classes: Optional[int] = None) -> List[float]:
    s = np.asarray(s, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    positives = y == 1
    n = _n_classes(s, n_classes)
    out = []
    for c in range(n):
        cell = y_hat[positives & (s == c)]
        if cell.size == 0:
            raise DomainError(f"equal opportunity: no positives in sensitive class {c}")
        out.append(float(cell.mean()))
    return out


def delta_sp(
    y_hat, s, n_classes: Optional[int] = None, mode: str = "max_pairwise"
) -> float:
    """|P(y_hat=1 | s=0) - P(y_hat=1 | s=1)|."""
    return _gap(positive_rates(y_hat, s, n_classes), mode)


def delta_eo(
    y_hat, y, s, n_classes: Optional[int] = None, mode: str = "max_pairwise"
) -> float:
    """|P(y_hat=1 | y=1, s=0) - P(y_hat=1 | y=1, s=1)|."""
    return _gap(true_positive_rates(y_hat, y, s, n_classes), mode)


# ── Explanation fairness ───────────────────────────────────────────────────────


def _top_count(k_percent: float, n: int) -> int:
    # round() absorbs float noise such as 25 * 12 / 100 = 3.0000000000000004
    return int(math.ceil(round(k_percent * n / 100.0, 9)))


def _check_k(k_percent: float):
    if not 0 < k_percent <= 100:
        raise DomainError(f"K must lie in (0, 100], got {k_percent}")


def label_top_k(eq: Sequence[float], k_percent: float = TOP_K_PERCENT) -> EqScores:
    """Mark the ceil(K% * N) highest EQ values; ties rank the lower index first."""
    _check_k(k_percent)
    eq = np.asarray(eq, dtype=np.float64)
    if eq.size == 0:
        raise DomainError("cannot rank an empty EQ sequence")
    order = np.argsort(-eq, kind="stable")
    top = np.sort(order[: _top_count(k_percent, eq.size)])
    q_hat = np.zeros(eq.size, dtype=np.int64)
    q_hat[top] = 1
    return EqScores(eq=eq, k_percent=float(k_percent), q_hat=q_hat, top_k_set=top)


def top_k_ratios(eqs: EqScores, s, n_classes: Optional[int] = None) -> List[float]:
    s = np.asarray(s, dtype=np.int64)
    return _per_class(eqs.q_hat.astype(np.float64), s, _n_classes(s, n_classes), "REF")


def delta_ref(
    eqs: EqScores, s, n_classes: Optional[int] = None, mode: str = "max_pairwise"
) -> float:
    """Gap between subgroup shares of the global top-K explanation quality."""
    return _gap(top_k_ratios(eqs, s, n_classes), mode)


def top_k_means(
    eq: Sequence[float],
    s,
    k_percent: float = TOP_K_PERCENT,
    n_classes: Optional[int] = None,
    scope: str = "per_group",
) -> List[float]:
    """Mean EQ of each subgroup's top-K instances."""
    _check_k(k_percent)
    eq = np.asarray(eq, dtype=np.float64)
    s = np.asarray(s, dtype=np.int64)
    n = _n_classes(s, n_classes)
    if scope not in VEF_SCOPES:
        raise ConfigurationError(
            f"Unknown VEF scope '{scope}'. Must be one of: {', '.join(VEF_SCOPES)}"
        )
    global_top = None
    if scope == "global":
        global_top = label_top_k(eq, k_percent).q_hat.astype(bool)

    means = []
    for c in range(n):
        members = np.flatnonzero(s == c)
        if members.size == 0:
            raise DomainError(f"VEF: sensitive class {c} is empty")
        if scope == "per_group":
            order = np.argsort(-eq[members], kind="stable")
            chosen = members[order[: _top_count(k_percent, members.size)]]
        else:
            chosen = members[global_top[members]]
        means.append(float(eq[chosen].mean()) if chosen.size else 0.0)
    return means


def delta_vef(
    eq: Sequence[float],
    s,
    k_percent: float = TOP_K_PERCENT,
    n_classes: Optional[int] = None,
    mode: str = "max_pairwise",
    scope: str = "per_group",
) -> float:
    """
    Gap between subgroup means of top-K explanation quality values.

    EQ is not clamped, so accuracy fidelity in {-1, 0, 1} puts the two-group gap
    in [0, 2].
    """
    return _gap(top_k_means(eq, s, k_percent, n_classes, scope), mode)


# ── Utility and Score ──────────────────────────────────────────────────────────


def utility_metrics(y_prob, y) -> Tuple[float, float, float]:
    """(AUC, F1, accuracy); F1 and accuracy threshold y_prob at 0.5."""
    y = np.asarray(y, dtype=np.int64)
    y_prob = np.asarray(y_prob, dtype=np.float64)
    y_hat = (y_prob >= DECISION_THRESHOLD).astype(np.int64)
    f1 = float(f1_score(y, y_hat, zero_division=0))
    acc = float(accuracy_score(y, y_hat))
    if np.unique(y).size < 2:
        raise DomainError(
            "AUC is undefined for single-class labels", partial={"f1": f1, "acc": acc}
        )
    return float(roc_auc_score(y, y_prob)), f1, acc


def overall_score(
    auc: float,
    f1: float,
    acc: float,
    sp: float,
    eo: float,
    ref: float,
    vef: float,
) -> float:
    """(AUC + F1 + Acc)/3 - (SP + EO)/2 - (REF + VEF)/2."""
    return (auc + f1 + acc) / 3.0 - (sp + eo) / 2.0 - (ref + vef) / 2.0


@dataclass
class FairnessReport:
    """Metric battery for one model on one split part (fractions, not percent)."""

    auc: float
    f1: float
    acc: float
    sp: float
    eo: float
    ref: float
    vef: float
    score: float
    subgroup_counts: Dict[str, int] = field(default_factory=dict)
    k_percent: float = TOP_K_PERCENT
    vef_scope: str = "per_group"
    multi_class_mode: str = "max_pairwise"
    multi_class: Dict[str, Dict[str, float]] = field(default_factory=dict)
    part: str = ""

    def metrics(self) -> Dict[str, float]:
        return {key: getattr(self, key) for key in REPORT_METRICS}

    def to_dict(self, scale: float = REPORT_SCALE) -> Dict:
        out = {key: value * scale for key, value in self.metrics().items()}
        out.update(
            {
                "scale": scale,
                "part": self.part,
                "k_percent": self.k_percent,
                "vef_scope": self.vef_scope,
                "multi_class_mode": self.multi_class_mode,
                "subgroup_counts": dict(self.subgroup_counts),
                "multi_class": {
                    mode: {k: v * scale for k, v in gaps.items()}
                    for mode, gaps in self.multi_class.items()
                },
            }
        )
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "FairnessReport":
        scale = data.get("scale", REPORT_SCALE)
        return cls(
            **{key: data[key] / scale for key in REPORT_METRICS},
            subgroup_counts=dict(data.get("subgroup_counts", {})),
            k_percent=data.get("k_percent", TOP_K_PERCENT),
            vef_scope=data.get("vef_scope", "per_group"),
            multi_class_mode=data.get("multi_class_mode", "max_pairwise"),
            multi_class={
                mode: {k: v / scale for k, v in gaps.items()}
                for mode, gaps in data.get("multi_class", {}).items()
            },
            part=data.get("part", ""),
        )


def build_report(
    y_prob,
    y,
    s,
    eq,
    k_percent: float = TOP_K_PERCENT,
    n_classes: Optional[int] = None,
    multi_class_mode: str = "max_pairwise",
    vef_scope: str = "per_group",
    part: str = "",
) -> FairnessReport:
    """Compute every metric from predictions, labels and explanation quality."""
    y = np.asarray(y, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    y_prob = np.asarray(y_prob, dtype=np.float64)
    n = _n_classes(s, n_classes)
    y_hat = (y_prob >= DECISION_THRESHOLD).astype(np.int64)

    auc, f1, acc = utility_metrics(y_prob, y)
    eqs = label_top_k(eq, k_percent)
    per_class = {
        "sp": positive_rates(y_hat, s, n),
        "eo": true_positive_rates(y_hat, y, s, n),
        "ref": top_k_ratios(eqs, s, n),
        "vef": top_k_means(eq, s, k_percent, n, vef_scope),
    }
    gaps = {key: _gap(values, multi_class_mode) for key, values in per_class.items()}
    multi = {}
    if n > 2:
        multi = {
            mode: {
                key: multi_class_gap(values, mode) for key, values in per_class.items()
            }
            for mode in MULTI_CLASS_MODES
        }

    counts = {}
    for c in range(n):
        for label in (0, 1):
            counts[f"s={c},y={label}"] = int(np.sum((s == c) & (y == label)))

    return FairnessReport(
        auc=auc,
        f1=f1,
        acc=acc,
        **gaps,
        score=overall_score(auc, f1, acc, **gaps),
        subgroup_counts=counts,
        k_percent=float(k_percent),
        vef_scope=vef_scope,
        multi_class_mode=multi_class_mode,
        multi_class=multi,
        part=part,
    )
