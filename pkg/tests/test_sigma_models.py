import numpy as np
import pytest

from spdest import (
    NonNegativityViolation,
    ValidationError,
    builtin_model,
    custom_model,
    eval_sigma,
    eval_sigma_sq,
    model_from_id,
)
from spdest.sigma_models import BUILTIN_IDS, numeric_lipschitz


def test_table_values():
    assert eval_sigma(builtin_model("sigma1"), 0.7) == 0.1
    assert eval_sigma(builtin_model("sigma2"), -3.0) == 2.0
    # sin(0) = 0 so sigma3(2) = (1/8) e^0
    assert eval_sigma(builtin_model("sigma3"), 2.0) == pytest.approx(0.125, abs=0)
    assert eval_sigma(builtin_model("zero"), 5.0) == 0.0
    assert eval_sigma(builtin_model("sigma4"), 2.0) == pytest.approx(1.0 + 1 / 32, abs=0)
    assert eval_sigma(builtin_model("sigma5"), 2.0) == pytest.approx(1.125, abs=0)


def test_square_values():
    assert eval_sigma_sq(builtin_model("sigma3"), 2.0) == 0.015625
    # exactly the float square of 0.1, which is 0.01 up to one ulp
    assert eval_sigma_sq(builtin_model("sigma1"), 10.0) == 0.1 * 0.1
    assert eval_sigma_sq(builtin_model("sigma1"), 10.0) == pytest.approx(0.01, rel=1e-15)
    assert eval_sigma_sq(builtin_model("sigma2"), 0.0) == 4.0


@pytest.mark.parametrize("kind", BUILTIN_IDS)
def test_square_is_exact_square(kind):
    model = builtin_model(kind)
    u = np.linspace(-10, 10, 2001)
    s = eval_sigma(model, u)
    assert np.array_equal(eval_sigma_sq(model, u), s * s)


def test_sigma3_symmetry_about_two():
    model = builtin_model("sigma3")
    # dyadic offsets keep 2 +/- delta exact, so symmetry holds to the bit
    deltas = np.arange(0, 4097) / 1024.0
    left = eval_sigma(model, 2.0 - deltas)
    right = eval_sigma(model, 2.0 + deltas)
    assert np.array_equal(left, right)
    # and to rounding accuracy for arbitrary offsets
    deltas = np.linspace(0, 5, 1001)
    left = eval_sigma(model, 2.0 - deltas)
    right = eval_sigma(model, 2.0 + deltas)
    assert np.allclose(left, right, rtol=1e-12, atol=0)


@pytest.mark.parametrize("kind", BUILTIN_IDS)
def test_empirical_lipschitz(kind):
    model = builtin_model(kind)
    rng = np.random.Generator(np.random.Philox(2024))
    u = rng.uniform(-10, 10, size=10_000)
    v = rng.uniform(-10, 10, size=10_000)
    gap = np.abs(eval_sigma(model, u) - eval_sigma(model, v))
    # Tiny slack covers the finite sampling of the derivative bound itself.
    assert np.all(gap <= model.lipschitz * np.abs(u - v) + 1e-12)


def test_sigma3_lipschitz_matches_dense_derivative():
    model = builtin_model("sigma3")
    dense = numeric_lipschitz(model.fn, 1.0, 3.0, 400_001)
    assert model.lipschitz == pytest.approx(dense, rel=1e-4)
    # Analytic stationary value max (1/2) e^s sqrt(1-s^2) at s=(sqrt5-1)/2.
    s = (np.sqrt(5) - 1) / 2
    assert model.lipschitz == pytest.approx(0.5 * np.exp(s) * np.sqrt(1 - s * s), rel=1e-5)


def test_custom_model_negative_raises():
    model = custom_model("u - 1", lipschitz=1.0)
    with pytest.raises(NonNegativityViolation):
        eval_sigma(model, -2.0)
    assert eval_sigma(model, 3.0) == 2.0


def test_custom_expression_and_id_roundtrip():
    model = model_from_id("custom:0.5*abs(sin(u))", lipschitz=0.5)
    assert model.kind == "custom"
    assert eval_sigma(model, np.pi / 2) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        model_from_id("sigma99")
    with pytest.raises(ValidationError):
        custom_model("u +* 2", lipschitz=1.0)


def test_custom_requires_lipschitz():
    with pytest.raises(ValidationError):
        custom_model("u*u", lipschitz=float("nan"))
    with pytest.raises(ValidationError):
        custom_model("u*u", lipschitz=-1.0)


def test_scalar_vs_array_evaluation():
    model = builtin_model("sigma6")
    assert isinstance(eval_sigma(model, 1.0), float)
    arr = eval_sigma(model, np.array([1.0, 2.0]))
    assert arr.shape == (2,)
    assert arr[0] == eval_sigma(model, 1.0)
