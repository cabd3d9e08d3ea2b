"""
backend/fairexp/training/trainer.py
Comprehensive-fairness training loop, vanilla and reweighting baselines, evaluation

One epoch of CFA training on the full training part:

    1. explain the current model on X and mask each row's top-k features
    2. forward X and the masked X through the encoder (shared dropout masks)
    3. loss = L_u + lam * (D(H) + D(H^m))          (collapsed mode)
       loss = L_u + alpha * D(H) + beta * L_exp     (three-term mode)
       the fairness weights are 0 during the warm-up epochs and rise linearly
       to full strength over the ramp epochs
    4. theta <- theta - lr * (c * grad + weight_decay * theta), with c clipping
       the global gradient norm at max_grad_norm
    5. score the validation part; keep the best checkpoint

Training stops after ``patience`` epochs at full fairness weight without a
strictly better validation Score, or at the epoch cap. Test metrics are computed
once, on the selected checkpoint.
"""

import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Optional

import numpy as np

from backend.data.dataset import Dataset, Normalizer, Split

from ..analysis.explain import build_mask, explain, fidelity
from ..analysis.fairmetrics import FairnessReport, build_report
from ..core.distances import DistancePlan, DistanceSpec, subgroup_distance
from ..core.model import (
    LossTerms,
    MlpModel,
    backward,
    composite_loss,
    forward,
    predict_proba,
    sgd_step,
)
from ..core.numerics import child_rngs
from ..utils import constants as C
from ..utils.errors import ConfigurationError, DomainError, NumericError

logger = logging.getLogger(__name__)

LOG_EVERY = 10
RNG_STREAMS = ("init", "dropout", "plan", "eval")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    lam: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    mode: str = "collapsed"
    learning_rate: float = C.LEARNING_RATE
    epochs: int = C.EPOCHS
    patience: int = C.PATIENCE
    k_percent: float = C.TOP_K_PERCENT
    k_mask: int = C.MASKED_FEATURES
    distance: DistanceSpec = field(default_factory=DistanceSpec)
    train_explainer: str = "gradient"
    selection_explainer: str = "gradient"
    eval_explainer: str = "hsic"
    fidelity_variant: str = "accuracy"
    vef_scope: str = "per_group"
    multi_class_mode: str = "max_pairwise"
    seed: int = C.DEFAULT_SEED
    weight_decay: float = 0.0
    max_grad_norm: float = C.MAX_GRAD_NORM
    fairness_warmup: float = C.FAIRNESS_WARMUP
    fairness_ramp: float = C.FAIRNESS_RAMP
    dropout: float = C.DROPOUT
    hidden_layers: int = C.HIDDEN_LAYERS
    hidden_width: int = C.HIDDEN_WIDTH
    mask_refresh_every: int = 1
    n_neighbors: int = C.HSIC_NEIGHBORS
    lasso_penalty: float = C.HSIC_PENALTY
    reweight_eta: float = C.REWEIGHT_ETA
    reweight_iterations: int = C.REWEIGHT_ITERATIONS

    def __post_init__(self):
        object.__setattr__(self, "distance", DistanceSpec.from_config(self.distance))
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1 or self.patience < 1 or self.mask_refresh_every < 1:
            raise ConfigurationError(
                "epochs, patience and mask_refresh_every must be >= 1"
            )
        if self.max_grad_norm < 0:
            raise ConfigurationError("max_grad_norm must be nonnegative")
        warmup, ramp = self.fairness_warmup, self.fairness_ramp
        if min(warmup, ramp) < 0 or warmup + ramp > 1:
            raise ConfigurationError(
                "fairness_warmup and fairness_ramp must be nonnegative "
                "and sum to at most 1"
            )

    @property
    def loss_terms(self) -> LossTerms:
        return LossTerms(self.distance, self.lam, self.alpha, self.beta, self.mode)

    def fairness_scale(self, epoch: int) -> float:
        """
        Share of the fairness weights in force at ``epoch`` (1-based).

        0 through the warm-up epochs, then a linear rise to 1 over the ramp
        epochs, then 1.
        """
        warmup = int(round(self.fairness_warmup * self.epochs))
        ramp = int(round(self.fairness_ramp * self.epochs))
        if epoch <= warmup:
            return 0.0
        if epoch >= warmup + ramp:
            return 1.0
        return (epoch - warmup) / ramp

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["distance"] = self.distance.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown training options: {unknown}")
        return cls(**data)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    L_u: float
    L_f: Optional[float]
    L_exp: Optional[float]
    val_score: float
    fairness_scale: float = 1.0
    grad_norm: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class RunResult:
    """Selected checkpoint, training history and reports of one run."""

    method: str
    config: TrainConfig
    model: MlpModel
    normalizer: Optional[Normalizer]
    feature_names: List[str]
    best_epoch: int
    best_val_score: float
    epochs_run: int
    stopped_early: bool
    history: List[EpochRecord]
    val_report: FairnessReport
    test_report: FairnessReport
    extras: Dict = field(default_factory=dict)
    final_model: Optional[MlpModel] = None

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_dict(self) -> Dict:
        """JSON-ready summary; parameters and history are stored separately."""
        return {
            "method": self.method,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "best_epoch": self.best_epoch,
            "best_val_score": self.best_val_score * C.REPORT_SCALE,
            "epochs_run": self.epochs_run,
            "stopped_early": self.stopped_early,
            "val_report": self.val_report.to_dict(),
            "test_report": self.test_report.to_dict(),
            "extras": self.extras,
        }


# ── Evaluation ─────────────────────────────────────────────────────────────────


def evaluate(
    model: MlpModel,
    ds: Dataset,
    indices,
    k_percent: float = C.TOP_K_PERCENT,
    k_mask: int = C.MASKED_FEATURES,
    explainer: str = "hsic",
    fidelity_variant: str = "accuracy",
    vef_scope: str = "per_group",
    multi_class_mode: str = "max_pairwise",
    reference=None,
    n_neighbors: int = C.HSIC_NEIGHBORS,
    lasso_penalty: float = C.HSIC_PENALTY,
    part: str = "",
) -> FairnessReport:
    """
    Full metric battery of a frozen model on ``ds`` rows ``indices``.

    EQ of an instance is its fidelity after masking the explainer's top-k
    features.
    """
    idx = np.asarray(indices)
    x, y, s = ds.x[idx], ds.y[idx], ds.s[idx]
    try:
        exp = explain(
            model,
            x,
            explainer,
            reference=reference,
            n_neighbors=n_neighbors,
            lasso_penalty=lasso_penalty,
        )
        mask = build_mask(exp, k_mask)
        eq = fidelity(model, x, mask, y, fidelity_variant).values
        return build_report(
            predict_proba(model, x),
            y,
            s,
            eq,
            k_percent=k_percent,
            n_classes=ds.n_sensitive,
            multi_class_mode=multi_class_mode,
            vef_scope=vef_scope,
            part=part,
        )
    except DomainError as exc:
        raise DomainError(f"{part or 'evaluation'}: {exc}", exc.partial) from exc


def _evaluate_with(model, ds, indices, cfg: TrainConfig, explainer, reference, part):
    return evaluate(
        model,
        ds,
        indices,
        k_percent=cfg.k_percent,
        k_mask=cfg.k_mask,
        explainer=explainer,
        fidelity_variant=cfg.fidelity_variant,
        vef_scope=cfg.vef_scope,
        multi_class_mode=cfg.multi_class_mode,
        reference=reference,
        n_neighbors=cfg.n_neighbors,
        lasso_penalty=cfg.lasso_penalty,
        part=part,
    )


# ── Training ───────────────────────────────────────────────────────────────────


def _prepare(ds: Dataset, split: Split) -> Dataset:
    if ds.normalizer is None:
        return ds.normalized(split)
    return ds


def _fit(
    ds: Dataset,
    split: Split,
    cfg: TrainConfig,
    method: str,
    sample_weight: Optional[np.ndarray] = None,
) -> RunResult:
    data = _prepare(ds, split)
    rngs = child_rngs(cfg.seed, RNG_STREAMS)
    model = MlpModel.init(
        data.d, rngs["init"], cfg.hidden_layers, cfg.hidden_width, cfg.dropout
    )
    terms = cfg.loss_terms
    x_train = data.x[split.train]
    y_train = data.y[split.train]
    groups = data.subgroups(split.train)
    use_mask = terms.masked_weight != 0.0
    use_distance = use_mask or terms.raw_weight != 0.0
    if use_mask and not 1 <= cfg.k_mask < data.d:
        raise ConfigurationError(f"k_mask={cfg.k_mask} needs 1 <= k < d={data.d}")

    history: List[EpochRecord] = []
    best_model, best_epoch, best_score = model.copy(), 0, -np.inf
    stale = 0
    mask = None
    t0 = time.time()
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        scale = cfg.fairness_scale(epoch) if use_distance else 0.0
        epoch_terms = terms.scaled(scale)
        x_masked = None
        if use_mask and scale > 0.0:
            if mask is None or (epoch - 1) % cfg.mask_refresh_every == 0:
                exp = explain(
                    model,
                    x_train,
                    cfg.train_explainer,
                    reference=x_train,
                    n_neighbors=cfg.n_neighbors,
                    lasso_penalty=cfg.lasso_penalty,
                )
                mask = build_mask(exp, cfg.k_mask)
            x_masked = mask.apply(x_train)

        trace = forward(model, x_train, x_masked, train_mode=True, rng=rngs["dropout"])
        plan = None
        if use_distance and scale > 0.0:
            plan = DistancePlan.draw(
                groups, terms.distance, model.hidden_width, rngs["plan"]
            )
        loss, parts = composite_loss(
            trace, y_train, groups, epoch_terms, plan=plan, sample_weight=sample_weight
        )
        if not np.isfinite(loss):
            raise NumericError("non-finite training loss", epoch=epoch)
        try:
            grads = backward(
                model,
                trace,
                y_train,
                groups,
                epoch_terms,
                plan=plan,
                sample_weight=sample_weight,
            )
        except NumericError as exc:
            raise NumericError(
                "non-finite gradient", block=exc.block, epoch=epoch
            ) from exc
        grad_norm = sgd_step(
            model, grads, cfg.learning_rate, cfg.weight_decay, cfg.max_grad_norm
        )

        val = _evaluate_with(
            model, data, split.val, cfg, cfg.selection_explainer, x_train, "val"
        )
        history.append(
            EpochRecord(
                epoch,
                loss,
                parts["L_u"],
                parts["L_f"],
                parts["L_exp"],
                val.score,
                scale if use_distance else 1.0,
                grad_norm,
            )
        )
        if epoch % LOG_EVERY == 0:
            logger.debug(
                "epoch %d loss=%.5f L_u=%.5f |grad|=%.3g val_score=%.4f",
                epoch,
                loss,
                parts["L_u"],
                grad_norm,
                val.score,
            )

        if val.score > best_score:
            best_model, best_epoch, best_score = model.copy(), epoch, val.score
            stale = 0
        elif use_distance and scale < 1.0:
            # patience counts from the first epoch at full fairness weight
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.debug("early stop at epoch %d (best %d)", epoch, best_epoch)
                break

    val_report = _evaluate_with(
        best_model, data, split.val, cfg, cfg.eval_explainer, x_train, "val"
    )
    test_report = _evaluate_with(
        best_model, data, split.test, cfg, cfg.eval_explainer, x_train, "test"
    )
    logger.info(
        "%s seed=%d best_epoch=%d/%d test_score=%.2f (%.1fs)",
        method,
        cfg.seed,
        best_epoch,
        epoch,
        test_report.score * C.REPORT_SCALE,
        time.time() - t0,
    )
    return RunResult(
        method=method,
        config=cfg,
        model=best_model,
        normalizer=data.normalizer,
        feature_names=list(data.feature_names),
        best_epoch=best_epoch,
        best_val_score=float(best_score),
        epochs_run=epoch,
        stopped_early=epoch < cfg.epochs,
        history=history,
        val_report=val_report,
        test_report=test_report,
        final_model=model,
    )


def train_cfa(ds: Dataset, split: Split, cfg: TrainConfig) -> RunResult:
    """Train with the explanation-fairness regulariser, select by validation Score."""
    return _fit(ds, split, cfg, "cfa")


def train_vanilla(ds: Dataset, split: Split, cfg: TrainConfig) -> RunResult:
    """Plain cross-entropy training: CFA with every fairness weight at zero."""
    return _fit(ds, split, replace(cfg, lam=0.0, alpha=0.0, beta=0.0), "vanilla")


# ── Reweighting baseline ───────────────────────────────────────────────────────


def reweight_weights(y, s, multipliers) -> np.ndarray:
    """w_i = exp(lambda_{s_i} * (2 y_i - 1)), rescaled to mean 1."""
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.int64)
    logits = np.asarray(multipliers, dtype=np.float64)[s] * (2.0 * y - 1.0)
    w = np.exp(logits - logits.max())
    return w / w.mean()


def train_reweight(
    ds: Dataset,
    split: Split,
    cfg: TrainConfig,
    eta: Optional[float] = None,
    iterations: Optional[int] = None,
) -> RunResult:
    """
    Label-bias reweighting for statistical parity.

    Each outer iteration trains a weighted cross-entropy model from the same
    seed, measures the signed parity violation v_s = P(y_hat=1) - P(y_hat=1|s)
    on the training part and moves the group multiplier lambda_s by eta * v_s.
    Positive multipliers up-weight positive labels of that group.
    """
    eta = cfg.reweight_eta if eta is None else float(eta)
    iterations = cfg.reweight_iterations if iterations is None else int(iterations)
    if ds.n_sensitive != 2:
        raise ConfigurationError("reweighting needs a binary sensitive attribute")
    if iterations < 1:
        raise ConfigurationError("reweight_iterations must be >= 1")

    plain = replace(cfg, lam=0.0, alpha=0.0, beta=0.0)
    data = _prepare(ds, split)
    y_train, s_train = data.y[split.train], data.s[split.train]
    multipliers = np.zeros(2)
    weights = np.ones(split.train.size)
    trace = []
    result = None
    for it in range(iterations):
        result = _fit(data, split, plain, "reweight", sample_weight=weights)
        p_train = predict_proba(result.model, data.x[split.train])
        y_hat = p_train >= C.DECISION_THRESHOLD
        overall = float(y_hat.mean())
        violation = np.array(
            [overall - float(y_hat[s_train == c].mean()) for c in (0, 1)]
        )
        trace.append(
            {
                "iteration": it,
                "multipliers": multipliers.tolist(),
                "weight_mean": float(weights.mean()),
                "train_sp": float(abs(violation[0] - violation[1])) * C.REPORT_SCALE,
            }
        )
        multipliers = multipliers + eta * violation
        weights = reweight_weights(y_train, s_train, multipliers)

    result.extras = {"reweight": trace, "eta": eta, "iterations": iterations}
    return result


TRAINERS = {
    "cfa": train_cfa,
    "vanilla": train_vanilla,
    "reweight": train_reweight,
}


def run_method(method: str, ds: Dataset, split: Split, cfg: TrainConfig) -> RunResult:
    if method not in TRAINERS:
        raise ConfigurationError(
            f"Unknown method '{method}'. Must be one of: {', '.join(C.METHODS)}"
        )
    return TRAINERS[method](ds, split, cfg)


def representation_gap(
    model: MlpModel, ds: Dataset, indices, spec: DistanceSpec, seed: int = 0
) -> float:
    """Eval-mode subgroup distance of the hidden representation over ``indices``."""
    idx = np.asarray(indices)
    h = forward(model, ds.x[idx]).h
    rng = child_rngs(seed, ("gap",))["gap"]
    return subgroup_distance(h, ds.subgroups(idx), spec, rng=rng)
