"""
backend/fairexp/core/model.py
Encoder + logistic classifier with analytic gradients of the composite loss

The utility predictor is ``classifier(encoder(x))``. The encoder is a stack of
affine + ReLU layers with inverted dropout after every activation; the last
encoder output is the hidden representation H fed to the subgroup distances.

Dropout masks are drawn once per layer and forward call and shared by the raw
and masked inputs, so H and H^m of the same row see the same units dropped.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..utils.constants import HIDDEN_LAYERS, HIDDEN_WIDTH, PROB_CLIP, TRAIN_MODES
from ..utils.errors import ConfigurationError, DimensionError, NumericError
from .distances import DistancePlan, DistanceSpec
from .groups import SubgroupView
from .numerics import Matrix, Rng

Gradients = Dict[str, np.ndarray]


class MlpModel:
    """Parameters of the encoder and the classifier head."""

    def __init__(
        self,
        layers: Sequence[Tuple[np.ndarray, np.ndarray]],
        classifier_weight: np.ndarray,
        classifier_bias: float = 0.0,
        dropout: float = 0.0,
    ):
        if not layers:
            raise ConfigurationError("encoder needs at least one layer")
        if not 0.0 <= dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        self.layers: List[Tuple[np.ndarray, np.ndarray]] = []
        width = None
        for i, (w, b) in enumerate(layers):
            w = np.array(w, dtype=np.float64, ndmin=2)
            b = np.array(b, dtype=np.float64).ravel()
            if width is not None and w.shape[0] != width:
                raise DimensionError(f"encoder[{i}] does not chain", (width,), w.shape)
            if b.shape[0] != w.shape[1]:
                raise DimensionError(f"encoder[{i}] bias mismatch", w.shape, b.shape)
            self.layers.append((w, b))
            width = w.shape[1]
        cw = np.array(classifier_weight, dtype=np.float64).reshape(-1, 1)
        if cw.shape[0] != width:
            raise DimensionError("classifier does not chain", (width,), cw.shape)
        self.classifier_weight = cw
        self.classifier_bias = np.array([float(classifier_bias)])
        self.dropout = float(dropout)

    @classmethod
    def init(
        cls,
        n_features: int,
        rng: Rng,
        hidden_layers: int = HIDDEN_LAYERS,
        hidden_width: int = HIDDEN_WIDTH,
        dropout: float = 0.0,
    ) -> "MlpModel":
        """He-initialised encoder, zero biases."""
        layers = []
        fan_in = n_features
        for _ in range(hidden_layers):
            w = rng.standard_normal((fan_in, hidden_width)) * np.sqrt(2.0 / fan_in)
            layers.append((w, np.zeros(hidden_width)))
            fan_in = hidden_width
        cw = rng.standard_normal((fan_in, 1)) * np.sqrt(1.0 / fan_in)
        return cls(layers, cw, 0.0, dropout)

    @property
    def n_features(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def hidden_width(self) -> int:
        return self.layers[-1][0].shape[1]

    def blocks(self) -> List[Tuple[str, np.ndarray]]:
        """Named parameter arrays in a fixed order."""
        out = []
        for i, (w, b) in enumerate(self.layers):
            out.append((f"encoder[{i}].weight", w))
            out.append((f"encoder[{i}].bias", b))
        out.append(("classifier.weight", self.classifier_weight))
        out.append(("classifier.bias", self.classifier_bias))
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for _, arr in self.blocks()])

    def from_vector(self, vector: np.ndarray) -> "MlpModel":
        """New model with this model's shapes and the given parameters."""
        vector = np.asarray(vector, dtype=np.float64)
        arrays = []
        offset = 0
        for _, arr in self.blocks():
            arrays.append(vector[offset : offset + arr.size].reshape(arr.shape).copy())
            offset += arr.size
        if offset != vector.size:
            raise DimensionError("parameter vector length", (offset,), vector.shape)
        layers = [(arrays[2 * i], arrays[2 * i + 1]) for i in range(len(self.layers))]
        return MlpModel(layers, arrays[-2], float(arrays[-1][0]), self.dropout)

    def copy(self) -> "MlpModel":
        return self.from_vector(self.to_vector())

    def to_dict(self) -> Dict:
        return {
            "layers": [
                {"weight": w.tolist(), "bias": b.tolist()} for w, b in self.layers
            ],
            "classifier": {
                "weight": self.classifier_weight.tolist(),
                "bias": float(self.classifier_bias[0]),
            },
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "MlpModel":
        layers = [
            (np.array(layer["weight"]), np.array(layer["bias"]))
            for layer in data["layers"]
        ]
        clf = data["classifier"]
        return cls(
            layers, np.array(clf["weight"]), clf["bias"], data.get("dropout", 0.0)
        )


@dataclass
class ForwardTrace:
    """Hidden representations, probabilities and the caches backward needs."""

    h: Matrix
    h_masked: Optional[Matrix]
    y_prob: np.ndarray
    logits: np.ndarray
    cache: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)
    cache_masked: Optional[List[Tuple[np.ndarray, np.ndarray, np.ndarray]]] = field(
        default=None, repr=False
    )


def _encode(model: MlpModel, x: Matrix, masks: List[np.ndarray]):
    cache = []
    a = x
    for (w, b), keep in zip(model.layers, masks):
        z = a @ w + b
        out = np.maximum(z, 0.0) * keep
        cache.append((a, z, keep))
        a = out
    return a, cache


def forward(
    model: MlpModel,
    x: Matrix,
    x_masked: Optional[Matrix] = None,
    train_mode: bool = False,
    rng: Optional[Rng] = None,
) -> ForwardTrace:
    """Run the encoder on ``x`` (and ``x_masked``) and the classifier on H."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionError("input width", (model.n_features,), x.shape)
    if x_masked is not None:
        x_masked = np.asarray(x_masked, dtype=np.float64)
        if x_masked.shape != x.shape:
            raise DimensionError("masked input shape", x.shape, x_masked.shape)

    n = x.shape[0]
    masks = []
    for w, _ in model.layers:
        if train_mode and model.dropout > 0.0:
            if rng is None:
                raise ConfigurationError("dropout in train mode needs an rng")
            keep = 1.0 - model.dropout
            masks.append((rng.random((n, w.shape[1])) < keep) / keep)
        else:
            masks.append(np.ones((n, w.shape[1])))

    h, cache = _encode(model, x, masks)
    logits = (h @ model.classifier_weight).ravel() + model.classifier_bias[0]
    y_prob = np.clip(expit(logits), PROB_CLIP, 1.0 - PROB_CLIP)

    h_masked, cache_masked = None, None
    if x_masked is not None:
        h_masked, cache_masked = _encode(model, x_masked, masks)
    return ForwardTrace(h, h_masked, y_prob, logits, cache, cache_masked)


def predict_proba(model: MlpModel, x: Matrix) -> np.ndarray:
    """Eval-mode probabilities of the positive class."""
    return forward(model, x).y_prob


# ── Loss ───────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class LossTerms:
    """Weights of the composite objective."""

    distance: DistanceSpec = field(default_factory=DistanceSpec)
    lam: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    mode: str = "collapsed"

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigurationError(
                f"Unknown loss mode '{self.mode}'. "
                f"Must be one of: {', '.join(TRAIN_MODES)}"
            )
        if min(self.lam, self.alpha, self.beta) < 0:
            raise ConfigurationError("loss weights must be nonnegative")

    @property
    def raw_weight(self) -> float:
        """Coefficient of D(H) in the total loss."""
        if self.mode == "collapsed":
            return self.lam
        return self.alpha + self.beta

    @property
    def masked_weight(self) -> float:
        """Coefficient of D(H^m) in the total loss."""
        return self.lam if self.mode == "collapsed" else self.beta

    def scaled(self, factor: float) -> "LossTerms":
        """Same objective with every fairness weight multiplied by ``factor``."""
        return replace(
            self,
            lam=self.lam * factor,
            alpha=self.alpha * factor,
            beta=self.beta * factor,
        )


def _bce(logits: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray]) -> float:
    per_row = np.logaddexp(0.0, logits) - y * logits
    if weights is not None:
        per_row = per_row * weights
    return float(np.mean(per_row))


def composite_loss(
    trace: ForwardTrace,
    y: Sequence[int],
    groups: SubgroupView,
    terms: LossTerms,
    plan: Optional[DistancePlan] = None,
    rng: Optional[Rng] = None,
    sample_weight: Optional[np.ndarray] = None,
) -> Tuple[float, Dict[str, Optional[float]]]:
    """
    Total loss and its parts.

    collapsed:  L = L_u + lam * L_exp
    three-term: L = L_u + alpha * L_f + beta * L_exp
    with L_f = D(H) and L_exp = D(H) + D(H^m). Parts that were not needed
    for the total are reported as None.
    """
    y = np.asarray(y, dtype=np.float64)
    l_u = _bce(trace.logits, y, sample_weight)
    parts: Dict[str, Optional[float]] = {"L_u": l_u, "L_f": None, "L_exp": None}

    w_raw, w_masked = terms.raw_weight, terms.masked_weight
    if w_masked != 0.0 and trace.h_masked is None:
        raise ConfigurationError("masked loss needs a masked forward pass")
    if w_raw == 0.0 and w_masked == 0.0:
        return l_u, parts

    plan = _ensure_plan(plan, groups, terms.distance, trace.h.shape[1], rng)
    d_raw = plan.evaluate(trace.h)[0]
    parts["L_f"] = d_raw
    d_masked = None
    if trace.h_masked is not None and w_masked != 0.0:
        d_masked = plan.evaluate(trace.h_masked)[0]
        parts["L_exp"] = d_raw + d_masked

    if terms.mode == "collapsed":
        loss = l_u + terms.lam * parts["L_exp"]
    else:
        loss = l_u + terms.alpha * d_raw
        if parts["L_exp"] is not None:
            loss += terms.beta * parts["L_exp"]
    return loss, parts


def _ensure_plan(plan, groups, spec, width, rng) -> DistancePlan:
    if plan is not None:
        return plan
    if rng is None:
        raise ConfigurationError("distance terms need an rng or a fixed plan")
    return DistancePlan.draw(groups, spec, width, rng)


# ── Backward ───────────────────────────────────────────────────────────────────


def _backprop_encoder(
    model: MlpModel, cache, d_out: np.ndarray, grads: Gradients
) -> np.ndarray:
    d_a = d_out
    for i in range(len(model.layers) - 1, -1, -1):
        w, _ = model.layers[i]
        a_in, z, keep = cache[i]
        d_z = d_a * keep * (z > 0.0)
        grads[f"encoder[{i}].weight"] += a_in.T @ d_z
        grads[f"encoder[{i}].bias"] += d_z.sum(axis=0)
        d_a = d_z @ w.T
    return d_a


def backward(
    model: MlpModel,
    trace: ForwardTrace,
    y: Sequence[int],
    groups: SubgroupView,
    terms: LossTerms,
    plan: Optional[DistancePlan] = None,
    rng: Optional[Rng] = None,
    sample_weight: Optional[np.ndarray] = None,
) -> Gradients:
    """Analytic gradient of ``composite_loss`` for every parameter block."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    grads: Gradients = {name: np.zeros_like(arr) for name, arr in model.blocks()}

    d_logit = expit(trace.logits) - y
    if sample_weight is not None:
        d_logit = d_logit * sample_weight
    d_logit = (d_logit / n).reshape(-1, 1)
    grads["classifier.weight"] += trace.h.T @ d_logit
    grads["classifier.bias"] += d_logit.sum()
    d_h = d_logit @ model.classifier_weight.T

    w_raw, w_masked = terms.raw_weight, terms.masked_weight
    if w_masked != 0.0 and trace.h_masked is None:
        raise ConfigurationError("masked loss needs a masked forward pass")
    if w_raw != 0.0 or w_masked != 0.0:
        plan = _ensure_plan(plan, groups, terms.distance, trace.h.shape[1], rng)
        if w_raw != 0.0:
            d_h = d_h + w_raw * plan.evaluate(trace.h)[1]
        if w_masked != 0.0:
            d_hm = w_masked * plan.evaluate(trace.h_masked)[1]
            _backprop_encoder(model, trace.cache_masked, d_hm, grads)
    _backprop_encoder(model, trace.cache, d_h, grads)

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient", block=name)
    return grads


def gradients_to_vector(model: MlpModel, grads: Gradients) -> np.ndarray:
    return np.concatenate([grads[name].ravel() for name, _ in model.blocks()])


def gradient_norm(grads: Gradients) -> float:
    """Global L2 norm over every parameter block."""
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def sgd_step(
    model: MlpModel,
    grads: Gradients,
    learning_rate: float,
    weight_decay: float = 0.0,
    max_grad_norm: float = 0.0,
) -> float:
    """
    In place: theta <- theta - lr * (c * grad + weight_decay * theta).

    c rescales the whole gradient to global norm ``max_grad_norm`` when it is
    longer (c = 1 otherwise, and always when ``max_grad_norm`` is 0). Returns the
    norm before clipping.
    """
    norm = gradient_norm(grads)
    clip = 1.0
    if max_grad_norm > 0.0 and norm > max_grad_norm:
        clip = max_grad_norm / norm
    for name, arr in model.blocks():
        arr -= learning_rate * (clip * grads[name] + weight_decay * arr)
    return norm


def input_gradient(model: MlpModel, x: Matrix) -> np.ndarray:
    """d y_prob / d x in eval mode, one row per instance."""
    trace = forward(model, x)
    p = expit(trace.logits)
    d_logit = (p * (1.0 - p)).reshape(-1, 1)
    d_a = d_logit @ model.classifier_weight.T
    for i in range(len(model.layers) - 1, -1, -1):
        w, _ = model.layers[i]
        _, z, keep = trace.cache[i]
        d_a = (d_a * keep * (z > 0.0)) @ w.T
    return d_a
