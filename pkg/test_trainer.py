"""Tests for the fairness training loop, baselines and model evaluation"""

import numpy as np
import pytest
from scipy.stats import spearmanr

from backend.data import Dataset, make_synthetic, split
from backend.fairexp.core.distances import DistanceSpec
from backend.fairexp.core.model import MlpModel
from backend.fairexp.core.numerics import make_rng
from backend.fairexp.training import trainer
from backend.fairexp.training.trainer import (
    TrainConfig,
    evaluate,
    representation_gap,
    reweight_weights,
    run_method,
    train_cfa,
    train_reweight,
    train_vanilla,
)
from backend.fairexp.utils.errors import ConfigurationError, NumericError

QUICK = dict(
    epochs=6,
    patience=6,
    hidden_width=8,
    eval_explainer="gradient",
    distance="sw",
    seed=3,
)


@pytest.fixture(scope="module")
def synthetic():
    ds = make_synthetic(240, 4, 0.3, make_rng(0))
    return ds, split(ds, (0.6, 0.2, 0.2), make_rng(1))


def _same_model(a, b):
    return np.array_equal(a.model.to_vector(), b.model.to_vector())


# ── Config ─────────────────────────────────────────────────────────────────────


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"lam": 1.0, "lamda": 2.0})
    cfg = TrainConfig.from_dict({"lam": 1.0, "distance": {"kind": "kl"}})
    assert cfg.distance.kind == "kl"
    assert cfg.to_dict()["distance"]["kind"] == "kl"


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigurationError):
        TrainConfig(patience=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(mode="four-term").loss_terms
    with pytest.raises(ConfigurationError):
        TrainConfig(max_grad_norm=-1.0)
    with pytest.raises(ConfigurationError):
        TrainConfig(fairness_warmup=0.7, fairness_ramp=0.5)


def test_fairness_schedule_warms_up_then_ramps():
    cfg = TrainConfig(epochs=10, fairness_warmup=0.2, fairness_ramp=0.4)
    scales = [cfg.fairness_scale(epoch) for epoch in range(1, 11)]
    assert scales == [0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0]
    flat = TrainConfig(epochs=10, fairness_warmup=0.0, fairness_ramp=0.0)
    assert [flat.fairness_scale(e) for e in (1, 10)] == [1.0, 1.0]


# ── CFA and vanilla ────────────────────────────────────────────────────────────


def test_lambda_zero_matches_vanilla(synthetic):
    ds, parts = synthetic
    cfa = train_cfa(ds, parts, TrainConfig(lam=0.0, **QUICK))
    vanilla = train_vanilla(ds, parts, TrainConfig(lam=0.7, **QUICK))
    assert _same_model(cfa, vanilla)
    assert cfa.best_epoch == vanilla.best_epoch
    assert vanilla.method == "vanilla"


def test_training_is_deterministic(synthetic):
    ds, parts = synthetic
    cfg = TrainConfig(lam=0.5, dropout=0.2, **QUICK)
    first = train_cfa(ds, parts, cfg)
    second = train_cfa(ds, parts, cfg)
    assert _same_model(first, second)
    assert first.to_dict() == second.to_dict()


def test_selected_checkpoint_has_best_validation_score(synthetic):
    ds, parts = synthetic
    result = train_cfa(ds, parts, TrainConfig(lam=0.5, **QUICK))
    assert all(result.best_val_score >= rec.val_score for rec in result.history)
    assert result.history[result.best_epoch - 1].val_score == result.best_val_score
    assert len(result.history) == result.epochs_run


def test_history_loss_decomposition(synthetic):
    ds, parts = synthetic
    cfg = TrainConfig(lam=0.3, fairness_warmup=0.0, fairness_ramp=0.0, **QUICK)
    result = train_cfa(ds, parts, cfg)
    for rec in result.history:
        assert rec.loss == pytest.approx(rec.L_u + 0.3 * rec.L_exp, abs=1e-12)


def test_warmup_epochs_train_on_utility_alone(synthetic):
    ds, parts = synthetic
    cfg = TrainConfig(lam=0.5, fairness_warmup=0.5, fairness_ramp=0.0, **QUICK)
    history = train_cfa(ds, parts, cfg).history
    warm, fair = history[:3], history[3:]
    assert all(rec.L_exp is None and rec.loss == rec.L_u for rec in warm)
    assert all(rec.fairness_scale == 0.0 for rec in warm)
    assert all(rec.fairness_scale == 1.0 for rec in fair)
    for rec in fair:
        assert rec.loss == pytest.approx(rec.L_u + 0.5 * rec.L_exp, abs=1e-12)


def test_three_term_mode_runs(synthetic):
    ds, parts = synthetic
    cfg = TrainConfig(
        alpha=0.2,
        beta=0.4,
        mode="three-term",
        fairness_warmup=0.0,
        fairness_ramp=0.0,
        **QUICK,
    )
    result = train_cfa(ds, parts, cfg)
    for rec in result.history:
        expected = rec.L_u + 0.2 * rec.L_f + 0.4 * rec.L_exp
        assert rec.loss == pytest.approx(expected, abs=1e-12)


def test_mask_size_must_fit_features(synthetic):
    ds, parts = synthetic
    with pytest.raises(ConfigurationError):
        train_cfa(ds, parts, TrainConfig(lam=1.0, k_mask=ds.d, **QUICK))


def test_unknown_method(synthetic):
    ds, parts = synthetic
    with pytest.raises(ConfigurationError):
        run_method("adversarial", ds, parts, TrainConfig(**QUICK))


def test_non_finite_loss_names_epoch(synthetic, monkeypatch):
    ds, parts = synthetic

    def broken_loss(*args, **kwargs):
        return float("nan"), {"L_u": float("nan"), "L_f": None, "L_exp": None}

    monkeypatch.setattr(trainer, "composite_loss", broken_loss)
    with pytest.raises(NumericError) as err:
        train_cfa(ds, parts, TrainConfig(**QUICK))
    assert err.value.epoch == 1


def test_non_finite_gradient_names_block_and_epoch(synthetic, monkeypatch):
    ds, parts = synthetic

    def broken_backward(*args, **kwargs):
        raise NumericError("non-finite gradient", block="classifier.weight")

    monkeypatch.setattr(trainer, "backward", broken_backward)
    with pytest.raises(NumericError) as err:
        train_cfa(ds, parts, TrainConfig(**QUICK))
    assert err.value.block == "classifier.weight"
    assert err.value.epoch == 1


# ── Reweighting ────────────────────────────────────────────────────────────────


def test_reweight_weights_positive_mean_one():
    rng = make_rng(4)
    y = rng.integers(0, 2, size=50)
    s = rng.integers(0, 2, size=50)
    w = reweight_weights(y, s, [0.8, -1.5])
    assert np.all(w > 0)
    assert w.mean() == pytest.approx(1.0)
    assert np.all(reweight_weights(y, s, [0.0, 0.0]) == 1.0)


def test_reweight_zero_step_matches_vanilla(synthetic):
    ds, parts = synthetic
    cfg = TrainConfig(**QUICK)
    reweighted = train_reweight(ds, parts, cfg, eta=0.0, iterations=2)
    vanilla = train_vanilla(ds, parts, cfg)
    assert _same_model(reweighted, vanilla)
    assert len(reweighted.extras["reweight"]) == 2


def test_reweight_needs_binary_sensitive():
    rng = make_rng(5)
    y = np.tile([0, 1], 30)
    s = np.repeat([0, 1, 2], 20)
    ds = Dataset(rng.standard_normal((60, 3)), y, s, ("a", "b", "c"), "s", 3)
    parts = split(ds, (0.6, 0.2, 0.2), make_rng(0))
    with pytest.raises(ConfigurationError):
        train_reweight(ds, parts, TrainConfig(**QUICK))


# ── Evaluation ─────────────────────────────────────────────────────────────────


def test_evaluate_perfect_group_identical_model():
    x = np.array([[1.0, 0.2], [-1.0, 0.2]] * 4)
    y = np.array([1, 0] * 4)
    s = np.repeat([0, 1], 4)
    ds = Dataset(x, y, s, ("signal", "noise"), "s", 2)
    # logit = 10 * x0
    model = MlpModel(
        [(np.array([[1.0, -1.0], [0.0, 0.0]]), np.zeros(2))], [10.0, -10.0], 0.0
    )
    report = evaluate(model, ds, np.arange(8), k_percent=50, explainer="gradient")
    assert report.auc == report.f1 == report.acc == 1.0
    assert report.sp == report.eo == report.ref == report.vef == 0.0
    assert report.score == pytest.approx(1.0)


def test_evaluate_is_repeatable(synthetic):
    ds, parts = synthetic
    data = ds.normalized(parts)
    model = MlpModel.init(data.d, make_rng(6), hidden_width=8)
    first = evaluate(model, data, parts.test, reference=data.x[parts.train])
    second = evaluate(model, data, parts.test, reference=data.x[parts.train])
    assert first.to_dict() == second.to_dict()


# ── Debiasing behaviour ────────────────────────────────────────────────────────


SLOW = dict(
    epochs=150,
    patience=150,
    learning_rate=0.1,
    hidden_width=16,
    eval_explainer="gradient",
)


def _median_over_seeds(ds, parts, method, lam, seeds=range(5)):
    sps, accs = [], []
    for seed in seeds:
        result = run_method(method, ds, parts, TrainConfig(lam=lam, seed=seed, **SLOW))
        sps.append(result.test_report.sp)
        accs.append(result.test_report.acc)
    return float(np.median(sps)), float(np.median(accs))


@pytest.fixture(scope="module")
def biased():
    ds = make_synthetic(4000, 5, 0.4, make_rng(0))
    return ds, split(ds, (0.6, 0.2, 0.2), make_rng(1))


@pytest.mark.slow
def test_cfa_reduces_statistical_parity_gap(biased):
    ds, parts = biased
    base_sp, base_acc = _median_over_seeds(ds, parts, "cfa", 0.0)
    fair_sp, fair_acc = _median_over_seeds(ds, parts, "cfa", 1.0)
    assert fair_sp <= 0.5 * base_sp
    assert base_acc - fair_acc <= 0.02


@pytest.mark.slow
def test_fairness_gap_falls_with_lambda(biased):
    ds, parts = biased
    lambdas = [0.0, 0.001, 0.01, 0.1, 1.0, 10.0]
    gaps = []
    for lam in lambdas:
        eos = []
        sps = []
        for seed in range(5):
            cfg = TrainConfig(lam=lam, seed=seed, **SLOW)
            report = train_cfa(ds, parts, cfg).test_report
            sps.append(report.sp)
            eos.append(report.eo)
        gaps.append((np.median(sps) + np.median(eos)) / 2.0)
    rho, _ = spearmanr(lambdas, gaps)
    assert rho <= -0.6


@pytest.mark.slow
def test_reweight_reduces_training_parity_gap(biased):
    ds, parts = biased
    cfg = TrainConfig(reweight_eta=1.0, reweight_iterations=4, **SLOW)
    trace = train_reweight(ds, parts, cfg).extras["reweight"]
    assert trace[-1]["train_sp"] < trace[0]["train_sp"]


@pytest.mark.slow
def test_reweight_lowers_test_parity_gap_against_vanilla(biased):
    ds, parts = biased
    vanilla_sp, _ = _median_over_seeds(ds, parts, "vanilla", 0.0)
    reweight_sp, _ = _median_over_seeds(ds, parts, "reweight", 0.0)
    assert reweight_sp < vanilla_sp


@pytest.mark.slow
def test_large_lambda_aligns_class_conditioned_representations(biased):
    ds, parts = biased
    data = ds.normalized(parts)
    spec = DistanceSpec()
    gaps = {0.0: [], 1e3: []}
    for lam in gaps:
        for seed in range(5):
            result = train_cfa(data, parts, TrainConfig(lam=lam, seed=seed, **SLOW))
            assert np.isfinite(result.history[-1].loss)
            gaps[lam].append(
                representation_gap(result.final_model, data, parts.test, spec, seed)
            )
    assert np.median(gaps[1e3]) < 0.1 * np.median(gaps[0.0])
