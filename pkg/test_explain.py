"""Tests for gradient and HSIC-Lasso explainers, top-k masks and fidelity"""

import numpy as np
import pytest
from scipy.special import expit, logit

from backend.fairexp.analysis.explain import (
    HsicLassoExplainer,
    Mask,
    _centered_kernel,
    build_mask,
    explain,
    explain_gradient,
    explain_hsic_lasso,
    fidelity,
    nonnegative_lasso,
)
from backend.fairexp.core.model import MlpModel
from backend.fairexp.core.numerics import make_rng
from backend.fairexp.utils.errors import ConfigurationError, DimensionError, DomainError


@pytest.fixture
def linear_model():
    # one always-active unit: logit = 2*x0 - x1 + 5, feature 2 unused
    return MlpModel([(np.array([[2.0], [-1.0], [0.0]]), np.array([5.0]))], [1.0], 0.0)


@pytest.fixture
def first_feature_model():
    # logit = relu(x0) - relu(-x0) = x0
    w = np.array([[1.0, -1.0], [0.0, 0.0], [0.0, 0.0]])
    return MlpModel([(w, np.zeros(2))], [1.0, -1.0], 0.0)


@pytest.fixture
def sum_model():
    # logit = relu(x0 + x1) - 0.5
    return MlpModel([(np.array([[1.0], [1.0]]), np.zeros(1))], [1.0], -0.5)


# ── Gradient saliency ──────────────────────────────────────────────────────────


def test_gradient_hand_check_linear(linear_model):
    x = make_rng(0).uniform(-1.0, 1.0, size=(8, 3))
    exp = explain_gradient(linear_model, x)
    z = 2.0 * x[:, 0] - x[:, 1] + 5.0
    slope = expit(z) * (1.0 - expit(z))
    expected = np.abs(x * np.outer(slope, [2.0, -1.0, 0.0]))
    assert np.allclose(exp.importance, expected, atol=1e-12)
    assert np.all(exp.importance[:, 2] == 0.0)
    assert exp.explainer_id == "gradient"


def test_gradient_importances_nonnegative():
    rng = make_rng(1)
    for _ in range(20):
        model = MlpModel.init(4, rng, hidden_width=6)
        x = rng.standard_normal((10, 4))
        assert np.all(explain_gradient(model, x).importance >= 0.0)


# ── HSIC Lasso ─────────────────────────────────────────────────────────────────


def test_hsic_constant_neighborhood_is_zero(first_feature_model):
    point = np.array([0.3, -1.0, 2.0])
    reference = np.tile(point, (10, 1))
    coef = HsicLassoExplainer(first_feature_model, reference, 5).explain_point(point)
    assert coef.tolist() == [0.0, 0.0, 0.0]


def test_hsic_informative_feature_largest(first_feature_model):
    x = make_rng(2).standard_normal((80, 3))
    coef = explain_hsic_lasso(
        first_feature_model, x, 0, n_neighbors=60, lasso_penalty=1e-3
    )
    assert coef.shape == (3,)
    assert coef[0] > coef[1] and coef[0] > coef[2]


def test_hsic_output_length_and_nonnegative():
    rng = make_rng(3)
    for _ in range(5):
        model = MlpModel.init(4, rng, hidden_width=5)
        x = rng.standard_normal((40, 4))
        exp = explain(model, x[:6], method="hsic", reference=x, n_neighbors=20)
        assert exp.importance.shape == (6, 4)
        assert np.all(exp.importance >= 0.0)
        assert exp.explainer_id == "hsic"


def test_hsic_invariant_to_feature_rescaling(first_feature_model):
    rng = make_rng(4)
    reference = rng.standard_normal((30, 3))
    point = rng.standard_normal(3)
    scale = np.array([1.0, 1.0, 10.0])
    # neighborhood covers the whole reference, so only row order can change
    base = HsicLassoExplainer(first_feature_model, reference, 31)
    scaled = HsicLassoExplainer(first_feature_model, reference * scale, 31)
    assert np.allclose(
        base.explain_point(point), scaled.explain_point(point * scale), atol=1e-6
    )


def test_centered_kernel_scale_invariant():
    values = make_rng(5).standard_normal(15)
    assert np.allclose(_centered_kernel(values), _centered_kernel(values * 250.0))
    assert _centered_kernel(np.full(6, 2.0)) is None


def test_nonnegative_lasso_clips_negative_correlation():
    coef = nonnegative_lasso(np.eye(2), np.array([0.5, -0.5]), penalty=0.1)
    assert coef == pytest.approx([0.4, 0.0])


def test_nonnegative_lasso_small_penalty_recovers_weights():
    design = make_rng(6).standard_normal((50, 3))
    target = design @ np.array([1.5, 0.0, 0.5])
    coef = nonnegative_lasso(design, target, penalty=1e-6)
    assert coef == pytest.approx([1.5, 0.0, 0.5], abs=1e-4)


def test_hsic_neighborhood_keeps_duplicates_of_the_query(first_feature_model):
    point = np.array([0.3, -1.0, 2.0])
    others = make_rng(7).standard_normal((6, 3)) + 5.0
    reference = np.vstack([np.tile(point, (3, 1)), others])
    explainer = HsicLassoExplainer(first_feature_model, reference, n_neighbors=4)
    hood = explainer.neighborhood(point, self_row=0)
    assert hood.shape == (4, 3)
    assert np.all(hood[:3] == point)
    assert not np.all(hood[3] == point)
    outside = explainer.neighborhood(point)
    assert np.all(outside == point)


def test_hsic_neighbors_validated(first_feature_model):
    with pytest.raises(ConfigurationError):
        HsicLassoExplainer(first_feature_model, np.zeros((5, 3)), n_neighbors=1)
    with pytest.raises(DimensionError):
        HsicLassoExplainer(first_feature_model, np.zeros((5, 2)))


def test_unknown_explainer(first_feature_model):
    with pytest.raises(ConfigurationError):
        explain(first_feature_model, np.zeros((2, 3)), method="lime")


# ── Masks ──────────────────────────────────────────────────────────────────────


def test_build_mask_examples():
    assert build_mask(np.array([[0.1, 0.9, 0.5]]), 1).m.tolist() == [[1, 0, 1]]
    assert build_mask(np.full((1, 4), 0.3), 2).m.tolist() == [[0, 0, 1, 1]]


def test_build_mask_k_bounds():
    with pytest.raises(DomainError):
        build_mask(np.ones((2, 3)), 3)
    with pytest.raises(DomainError):
        build_mask(np.ones((2, 3)), 0)


def test_build_mask_exactly_k_zeros():
    rng = make_rng(6)
    for _ in range(50):
        d = int(rng.integers(2, 9))
        k = int(rng.integers(1, d))
        importance = rng.integers(0, 3, size=(7, d)).astype(float)
        mask = build_mask(importance, k)
        assert np.all((mask.m == 0).sum(axis=1) == k)
        kept_max = np.where(mask.m == 1, importance, -np.inf).max(axis=1)
        dropped_min = np.where(mask.m == 0, importance, np.inf).min(axis=1)
        assert np.all(dropped_min >= kept_max)


def test_mask_after_explain_deterministic():
    model = MlpModel.init(5, make_rng(7), hidden_width=6)
    x = make_rng(8).standard_normal((12, 5))
    first = build_mask(explain(model, x), 1)
    second = build_mask(explain(model, x), 1)
    assert np.array_equal(first.m, second.m)


# ── Fidelity ───────────────────────────────────────────────────────────────────


def test_fidelity_probability_example(sum_model):
    x = np.array([[logit(0.6) + 0.5, logit(0.9) - logit(0.6)]])
    mask = Mask(np.array([[1.0, 0.0]]), 1)
    record = fidelity(sum_model, x, mask, [1], variant="probability")
    assert record.values[0] == pytest.approx(0.3, abs=1e-12)
    assert record.variant == "probability"


def test_fidelity_accuracy_examples(sum_model):
    x = np.array([[-1.0, 3.0], [2.0, 1.0]])
    mask = Mask(np.array([[1.0, 0.0], [1.0, 0.0]]), 1)
    record = fidelity(sum_model, x, mask, [1, 1])
    assert record.values.tolist() == [1.0, 0.0]


def test_fidelity_identity_mask_is_zero():
    model = MlpModel.init(3, make_rng(9), hidden_width=4)
    x = make_rng(10).standard_normal((20, 3))
    y = make_rng(11).integers(0, 2, size=20)
    for variant in ("accuracy", "probability"):
        assert np.all(fidelity(model, x, np.ones_like(x), y, variant).values == 0.0)


def test_fidelity_errors(sum_model):
    with pytest.raises(DimensionError):
        fidelity(sum_model, np.zeros((2, 2)), np.ones((2, 3)), [0, 1])
    with pytest.raises(ConfigurationError):
        fidelity(sum_model, np.zeros((2, 2)), np.ones((2, 2)), [0, 1], "loss")
