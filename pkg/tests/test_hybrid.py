import numpy as np
import pytest

from mathoNet.benchmarks import fisher_rhs
from mathoNet.errors import DegenerateStencilError, StructuralError
from mathoNet.grad import backward, finite_diff_gradient
from mathoNet.hybrid import (
    StencilModel,
    hybrid_forward,
    rescale_stencil,
    stencil_apply,
    stencil_windows,
)
from mathoNet.symbolic import simplify, to_string
from toy_models import wire

DX = 0.04


def logistic_model(kernel=(1.0, -2.0, 1.0), outer=6.25) -> StencilModel:
    """``outer * kernel * p / dx^2 + p - p^2``."""
    model = StencilModel(DX, [1], ["identity"])
    model.kernel = kernel
    model.outer_coeff = outer
    wire(model.reaction, [[[0.0, 1.0]]], out=[[-1.0, 1.0]])
    return model


@pytest.fixture
def field(rng):
    return rng.uniform(0.0, 1.0, size=26)


class TestStencil:
    def test_windows(self):
        windows = stencil_windows([1.0, 2.0, 3.0, 4.0])
        assert windows.tolist() == [[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]

    def test_too_few_points(self):
        with pytest.raises(StructuralError):
            stencil_windows([1.0, 2.0])

    def test_laplace_kernel_on_a_quadratic(self):
        x = np.linspace(0.0, 1.0, 6)
        np.testing.assert_allclose(stencil_apply([1.0, -2.0, 1.0], x**2, 0.2), 2.0, rtol=1e-10)

    def test_constant_field(self):
        assert not np.any(stencil_apply([1.0, -2.0, 1.0], np.full(5, 3.0), 0.1))

    def test_linear(self, rng):
        p, q = rng.normal(size=(2, 10))
        kernel = rng.normal(size=3)
        np.testing.assert_allclose(
            stencil_apply(kernel, 2.0 * p - 3.0 * q, 0.5),
            2.0 * stencil_apply(kernel, p, 0.5) - 3.0 * stencil_apply(kernel, q, 0.5),
        )

    def test_kernel_size(self):
        with pytest.raises(StructuralError):
            stencil_apply([1.0, 1.0], np.zeros(4), 1.0)


class TestHybridForward:
    def test_pure_diffusion(self, field):
        model = StencilModel(DX, [1], ["identity"])
        model.kernel = [1.0, -2.0, 1.0]
        model.outer_coeff = 6.25
        np.testing.assert_allclose(
            hybrid_forward(model, field), fisher_rhs(field, DX, r=0.0)[1:-1], rtol=1e-12, atol=1e-9
        )

    def test_pure_reaction(self, field):
        model = logistic_model(outer=0.0)
        np.testing.assert_allclose(
            hybrid_forward(model, field), fisher_rhs(field, DX, d=0.0)[1:-1], rtol=1e-12, atol=1e-12
        )

    def test_full_equation(self, field):
        np.testing.assert_allclose(
            hybrid_forward(logistic_model(), field),
            fisher_rhs(field, DX)[1:-1],
            rtol=1e-12,
            atol=1e-9,
        )

    def test_dx_override(self, field):
        model = logistic_model(outer=1.0)
        model.reaction.set_masks(np.zeros(model.reaction.n_weights), np.zeros(model.reaction.n_groups))
        np.testing.assert_allclose(
            hybrid_forward(model, field, dx=2 * DX), hybrid_forward(model, field) / 4.0
        )
        assert model.dx == DX

    def test_rejects_wrong_windows(self):
        with pytest.raises(StructuralError):
            logistic_model().evaluate(np.zeros((2, 4)))


class TestStencilModel:
    def test_layout(self):
        model = StencilModel(DX, [2], ["identity", "sin"])
        assert list(model.prunable[:4]) == [False, False, False, True]
        assert list(model.groups[0]) == [0, 1, 2]
        assert list(model.groups[1]) == [3]
        assert model.n_weights == 4 + model.reaction.n_weights

    def test_rejects_bad_dx(self):
        with pytest.raises(StructuralError):
            StencilModel(0.0)

    def test_masked_outer_coefficient(self, field):
        model = logistic_model()
        model.mask[3] = 0.0
        np.testing.assert_allclose(hybrid_forward(model, field), fisher_rhs(field, DX, d=0.0)[1:-1])

    def test_gradient_matches_finite_differences(self, rng):
        model = StencilModel.random(0.1, [2], ["identity", "sin", "cos"], rng=rng)
        X = rng.uniform(0.0, 1.0, size=(3, 3))
        Y = rng.normal(size=3)
        output, trace = model.evaluate(X)
        grad = backward(model, trace, output - Y, 1.0)
        oracle = finite_diff_gradient(model, X, Y, 1.0)
        np.testing.assert_allclose(grad, oracle, rtol=1e-5, atol=1e-6)

    def test_document_round_trip(self, rng, field):
        model = StencilModel.random(DX, [2], ["identity", "cos"], rng=rng)
        model.mask[6] = 0.0
        copy = StencilModel.from_dict(model.to_dict())
        assert copy.to_dict() == model.to_dict()
        assert np.array_equal(hybrid_forward(copy, field), hybrid_forward(model, field))

    def test_malformed_document(self):
        with pytest.raises(StructuralError):
            StencilModel.from_dict({"model": "stencil", "dx": 0.1})


class TestRescale:
    def test_laplace_kernel(self):
        result = rescale_stencil(logistic_model())
        assert result.d_equiv == pytest.approx(6.25)
        assert result.deviation == 0.0
        assert result.kernel_sum == 0.0

    def test_scaled_kernel(self):
        result = rescale_stencil(logistic_model(kernel=(2.0, -4.0, 2.0), outer=1.0))
        assert result.d_equiv == pytest.approx(2.0)
        np.testing.assert_allclose(result.normalized_kernel, [1.0, -2.0, 1.0])

    def test_inconsistent_kernel(self):
        result = rescale_stencil(logistic_model(kernel=(0.86655, -1.0, 0.86655), outer=12.5))
        np.testing.assert_allclose(result.normalized_kernel, [1.7331, -2.0, 1.7331])
        assert result.deviation == pytest.approx(0.7331)
        assert result.d_equiv == pytest.approx(6.25)

    def test_reaction_rates(self):
        result = rescale_stencil(logistic_model())
        assert result.growth_rate == pytest.approx(1.0)
        assert result.logistic_rate == pytest.approx(1.0)
        assert result.reaction == "1.000·p - 1.000·p^2"
        assert result.equation == "6.250*CNN(p) + 1.000·p - 1.000·p^2"

    def test_degenerate_centre_tap(self):
        with pytest.raises(DegenerateStencilError):
            rescale_stencil(logistic_model(kernel=(1.0, 0.0, 1.0)))

    def test_expression(self):
        expr = logistic_model().to_expression()
        assert to_string(simplify(expr), names=["CNN(p)", "p"]) == (
            "6.250·CNN(p) + 1.000·p - 1.000·p^2"
        )
