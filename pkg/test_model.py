"""Tests for the encoder/classifier model, the composite loss and its gradients"""

import numpy as np
import pytest
from scipy.special import expit

from backend.fairexp.core.distances import DistancePlan, DistanceSpec
from backend.fairexp.core.groups import SubgroupView
from backend.fairexp.core.model import (
    LossTerms,
    MlpModel,
    backward,
    composite_loss,
    forward,
    gradients_to_vector,
    input_gradient,
    predict_proba,
    sgd_step,
)
from backend.fairexp.core.numerics import grad_check, make_rng
from backend.fairexp.utils.errors import (
    ConfigurationError,
    DimensionError,
    NumericError,
)

KINK = 1e-4


def _hand_model():
    w = np.array([[1.0, -1.0], [2.0, 0.5]])
    b = np.array([0.0, 0.1])
    return MlpModel([(w, b)], np.array([0.2, -1.0]), -0.5)


def test_zero_model_predicts_half():
    model = MlpModel([(np.zeros((2, 3)), np.zeros(3))], np.zeros(3), 0.0)
    p = predict_proba(model, make_rng(0).standard_normal((5, 2)))
    assert np.all(p == 0.5)


def test_forward_hand_example():
    trace = forward(_hand_model(), np.array([[1.0, 2.0]]))
    assert np.allclose(trace.h, [[5.0, 0.1]])
    assert trace.y_prob[0] == pytest.approx(expit(0.4))
    assert trace.h_masked is None


def test_forward_width_mismatch():
    with pytest.raises(DimensionError):
        forward(_hand_model(), np.ones((2, 3)))
    with pytest.raises(DimensionError):
        forward(_hand_model(), np.ones((2, 2)), np.ones((3, 2)))


def test_layers_must_chain():
    with pytest.raises(DimensionError):
        layers = [(np.ones((2, 3)), np.zeros(3)), (np.ones((4, 2)), np.zeros(2))]
        MlpModel(layers, [1, 1])


def test_eval_forward_is_pure():
    model = MlpModel.init(4, make_rng(1), hidden_width=6, dropout=0.5)
    x = make_rng(2).standard_normal((10, 4))
    first = forward(model, x)
    second = forward(model, x)
    assert first.h.tobytes() == second.h.tobytes()
    assert first.y_prob.tobytes() == second.y_prob.tobytes()


def test_dropout_masks_shared_between_raw_and_masked():
    model = MlpModel.init(3, make_rng(1), hidden_width=8, dropout=0.5)
    x = make_rng(2).standard_normal((6, 3))
    trace = forward(model, x, x.copy(), train_mode=True, rng=make_rng(3))
    assert np.array_equal(trace.h, trace.h_masked)
    with pytest.raises(ConfigurationError):
        forward(model, x, train_mode=True)


def test_model_dict_round_trip_exact():
    model = MlpModel.init(5, make_rng(4), hidden_layers=2, hidden_width=7)
    restored = MlpModel.from_dict(model.to_dict())
    assert np.array_equal(restored.to_vector(), model.to_vector())
    assert [name for name, _ in restored.blocks()] == [
        "encoder[0].weight",
        "encoder[0].bias",
        "encoder[1].weight",
        "encoder[1].bias",
        "classifier.weight",
        "classifier.bias",
    ]


def test_sgd_step_with_weight_decay():
    model = _hand_model()
    before = model.to_vector()
    grads = {name: np.ones_like(arr) for name, arr in model.blocks()}
    sgd_step(model, grads, learning_rate=0.1, weight_decay=0.5)
    assert np.allclose(model.to_vector(), before - 0.1 * (1.0 + 0.5 * before))


def test_sgd_step_clips_global_gradient_norm():
    model = _hand_model()
    before = model.to_vector()
    grads = {name: np.full_like(arr, 3.0) for name, arr in model.blocks()}
    norm = sgd_step(model, grads, learning_rate=0.1, max_grad_norm=2.0)
    assert norm == pytest.approx(3.0 * np.sqrt(before.size))
    step = before - model.to_vector()
    assert np.linalg.norm(step) == pytest.approx(0.1 * 2.0)
    assert np.allclose(step, step[0])


def test_sgd_step_leaves_short_gradients_alone():
    model = _hand_model()
    before = model.to_vector()
    grads = {name: np.full_like(arr, 1e-3) for name, arr in model.blocks()}
    sgd_step(model, grads, learning_rate=0.1, max_grad_norm=2.0)
    assert np.allclose(model.to_vector(), before - 1e-4)


def test_loss_terms_scaled():
    terms = LossTerms(lam=2.0, alpha=0.5, beta=1.0).scaled(0.25)
    assert (terms.lam, terms.alpha, terms.beta) == (0.5, 0.125, 0.25)
    assert LossTerms(lam=3.0).scaled(0.0).raw_weight == 0.0


# ── Composite loss ─────────────────────────────────────────────────────────────


def _batch(seed=0, n=12, d=3):
    rng = make_rng(seed)
    x = rng.standard_normal((n, d))
    y = np.tile([0, 1], n // 2)
    s = np.repeat([0, 1], n // 2)
    return x, y, SubgroupView.from_labels(y, s)


def test_lambda_zero_loss_is_cross_entropy():
    model = MlpModel.init(3, make_rng(0), hidden_width=4)
    x, y, groups = _batch()
    trace = forward(model, x, x * 0.0)
    loss, parts = composite_loss(trace, y, groups, LossTerms(lam=0.0))
    assert loss == parts["L_u"]
    assert parts["L_f"] is None and parts["L_exp"] is None


def test_two_point_mse_fixture():
    model = MlpModel([(np.eye(2), np.zeros(2))], np.array([1.0, 1.0]), 0.0)
    x = np.array([[1.0, 0.0], [0.0, 2.0]])
    y = np.array([0, 1])
    groups = SubgroupView.from_labels(y, [0, 1])
    spec = DistanceSpec(kind="mse", class_conditioned=False)
    trace = forward(model, x, np.zeros_like(x))
    loss, parts = composite_loss(
        trace, y, groups, LossTerms(spec, lam=1.0), rng=make_rng(0)
    )
    cross_entropy = np.mean([np.logaddexp(0.0, 1.0), np.logaddexp(0.0, 2.0) - 2.0])
    assert parts["L_f"] == pytest.approx(np.sqrt(5.0))
    assert loss == pytest.approx(cross_entropy + np.sqrt(5.0), abs=1e-12)


@pytest.mark.parametrize("kind", ["sw", "mse", "kl"])
def test_identical_subgroups_have_zero_fairness_loss(kind):
    # rows of the two sensitive classes are equal within each utility class
    x = np.array([[1.0, 0.5], [0.2, 2.0]] * 4)
    y = np.tile([0, 1], 4)
    s = np.repeat([0, 1], 4)
    model = MlpModel.init(2, make_rng(0), hidden_width=5)
    trace = forward(model, x)
    terms = LossTerms(DistanceSpec(kind=kind), alpha=1.0, mode="three-term")
    _, parts = composite_loss(
        trace, y, SubgroupView.from_labels(y, s), terms, rng=make_rng(1)
    )
    assert parts["L_f"] == pytest.approx(0.0, abs=1e-12)


def test_masked_loss_needs_masked_trace():
    model = MlpModel.init(3, make_rng(0), hidden_width=4)
    x, y, groups = _batch()
    with pytest.raises(ConfigurationError):
        trace = forward(model, x)
        composite_loss(trace, y, groups, LossTerms(lam=1.0), rng=make_rng(0))


@pytest.mark.parametrize(
    "terms",
    [
        LossTerms(DistanceSpec(kind="cosine"), lam=0.7),
        LossTerms(DistanceSpec(kind="sw"), alpha=0.3, beta=1.2, mode="three-term"),
    ],
)
def test_loss_decomposition(terms):
    model = MlpModel.init(3, make_rng(2), hidden_width=6)
    x, y, groups = _batch(seed=3)
    trace = forward(model, x, x * np.array([0.0, 1.0, 1.0]))
    loss, parts = composite_loss(trace, y, groups, terms, rng=make_rng(4))
    if terms.mode == "collapsed":
        expected = parts["L_u"] + terms.lam * parts["L_exp"]
    else:
        expected = (
            parts["L_u"] + terms.alpha * parts["L_f"] + terms.beta * parts["L_exp"]
        )
    assert loss == pytest.approx(expected, abs=1e-12)


# ── Gradients ──────────────────────────────────────────────────────────────────


def _draw_problem(kind, seed, mode="collapsed", dropout=0.0):
    """Random small net and batch; None when a ReLU input sits near its kink."""
    rng = make_rng(seed)
    d = int(rng.integers(2, 6))
    width = int(rng.integers(2, 9))
    n = 2 * int(rng.integers(4, 7))
    model = MlpModel.init(d, rng, hidden_width=width, dropout=dropout)
    model.layers[0][1][:] = 0.5
    x = rng.standard_normal((n, d))
    mask = np.ones((n, d))
    mask[np.arange(n), rng.integers(0, d, size=n)] = 0.0
    x_masked = x * mask
    y = np.tile([0, 1], n // 2)
    s = np.repeat([0, 1], n // 2)
    groups = SubgroupView.from_labels(y, s)
    spec = DistanceSpec(kind=kind, slices=4)
    if mode == "collapsed":
        terms = LossTerms(spec, lam=1.0)
    else:
        terms = LossTerms(spec, alpha=0.5, beta=2.0, mode="three-term")
    plan = DistancePlan.draw(groups, spec, width, rng)

    trace = forward(model, x, x_masked)
    for cache in (trace.cache, trace.cache_masked):
        if any(np.min(np.abs(z)) < KINK for _, z, _ in cache):
            return None
    row_mass = min(trace.h.sum(axis=1).min(), trace.h_masked.sum(axis=1).min())
    if kind == "kl" and row_mass < 0.1:
        return None
    return model, x, x_masked, y, groups, terms, plan


def _check(problem, sample_weight=None, dropout_seed=None):
    model, x, x_masked, y, groups, terms, plan = problem

    def run(m):
        rng = None if dropout_seed is None else make_rng(dropout_seed)
        return forward(m, x, x_masked, train_mode=rng is not None, rng=rng)

    def loss_at(theta):
        m = model.from_vector(theta)
        return composite_loss(
            run(m), y, groups, terms, plan=plan, sample_weight=sample_weight
        )[0]

    grads = backward(
        model, run(model), y, groups, terms, plan=plan, sample_weight=sample_weight
    )
    return grad_check(loss_at, model.to_vector(), gradients_to_vector(model, grads))


def _valid_problems(kind, count=20, **kwargs):
    found, seed = [], 0
    while len(found) < count:
        problem = _draw_problem(kind, seed, **kwargs)
        seed += 1
        if problem is not None:
            found.append(problem)
    return found


@pytest.mark.parametrize("kind", ["sw", "cosine", "kl", "mse"])
def test_grad_check_every_distance(kind):
    for problem in _valid_problems(kind):
        assert _check(problem) < 1e-4


@pytest.mark.parametrize("kind", ["mse", "sw"])
def test_grad_check_three_term_mode(kind):
    for problem in _valid_problems(kind, count=5, mode="three-term"):
        assert _check(problem) < 1e-4


def test_grad_check_per_row_cosine():
    for problem in _valid_problems("cosine", count=5):
        model, x, x_masked, y, groups, terms, _ = problem
        spec = DistanceSpec(kind="cosine", per_row_cosine=True)
        plan = DistancePlan.draw(groups, spec, model.hidden_width, make_rng(0))
        terms = LossTerms(spec, lam=1.0)
        assert _check((model, x, x_masked, y, groups, terms, plan)) < 1e-4


def test_grad_check_sample_weights_and_dropout():
    for problem in _valid_problems("mse", count=5, dropout=0.3):
        weights = make_rng(1).uniform(0.5, 1.5, size=problem[1].shape[0])
        assert _check(problem, sample_weight=weights, dropout_seed=7) < 1e-4


def test_lambda_zero_gradients_equal_cross_entropy():
    model = MlpModel.init(3, make_rng(5), hidden_width=4)
    x, y, groups = _batch(seed=6)
    with_mask = backward(model, forward(model, x, x * 0.5), y, groups, LossTerms())
    plain = backward(model, forward(model, x), y, groups, LossTerms())
    for name, _ in model.blocks():
        assert np.allclose(with_mask[name], plain[name], atol=1e-12, rtol=0)


def test_non_finite_gradient_names_block():
    model = MlpModel.init(3, make_rng(0), hidden_width=4)
    model.classifier_weight[0, 0] = np.nan
    x, y, groups = _batch()
    with pytest.raises(NumericError) as err:
        backward(model, forward(model, x), y, groups, LossTerms())
    assert err.value.block is not None


def test_input_gradient_matches_finite_differences():
    model = MlpModel.init(3, make_rng(8), hidden_width=5)
    model.layers[0][1][:] = 0.5
    x = make_rng(9).standard_normal((1, 3))
    analytic = input_gradient(model, x)[0]

    def prob(v):
        return float(predict_proba(model, v.reshape(1, -1))[0])

    assert grad_check(prob, x[0], analytic) < 1e-6
