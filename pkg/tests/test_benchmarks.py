import math

import numpy as np
import pytest

from mathoNet.benchmarks import (
    Dataset,
    SystemSpec,
    fisher_rhs,
    generate_dataset,
    integrate,
    lorenz_rhs,
    lv_first_integral,
    lv_rhs,
    rk4_step,
)
from mathoNet.errors import IntegrationError, StructuralError


class TestRightHandSides:
    def test_lorenz(self):
        np.testing.assert_allclose(lorenz_rhs([1.0, 1.0, 1.0]), [0.0, 26.0, 1.0 - 8.0 / 3.0])

    def test_lorenz_wrong_size(self):
        with pytest.raises(StructuralError):
            lorenz_rhs([1.0, 2.0])

    def test_lv_equilibrium(self):
        np.testing.assert_allclose(lv_rhs([1.8 / 0.8, 1.3 / 0.9]), [0.0, 0.0], atol=1e-14)

    def test_lv_axes(self):
        np.testing.assert_allclose(lv_rhs([1.0, 0.0]), [1.3, 0.0])

    @pytest.mark.parametrize("value", [0.0, 1.0])
    def test_fisher_fixed_points(self, value):
        assert not np.any(fisher_rhs(np.full(26, value), 0.04))

    def test_fisher_quadratic_profile(self):
        x = np.linspace(0.0, 1.0, 11)
        out = fisher_rhs(x**2, 0.1, d=6.25, r=0.0)
        np.testing.assert_allclose(out[1:-1], 2 * 6.25, rtol=1e-10)

    def test_fisher_reflects_at_the_ends(self):
        p = np.array([1.0, 0.0, 0.0, 0.0])
        out = fisher_rhs(p, 1.0, d=1.0, r=0.0)
        # ghost value p[1] = 0 mirrors the left end
        assert out[0] == -2.0
        assert out[1] == 1.0

    def test_fisher_grid_too_small(self):
        with pytest.raises(StructuralError):
            fisher_rhs([0.1, 0.2], 0.5)


class TestRK4:
    def test_exponential_step(self):
        value = rk4_step(lambda x: x, [1.0], 0.1)[0]
        assert value == pytest.approx(1.1051708333333, abs=1e-12)
        assert abs(value - math.exp(0.1)) < 1e-7

    def test_zero_rhs(self):
        state = np.array([3.0, -2.0])
        assert np.array_equal(rk4_step(lambda x: np.zeros_like(x), state, 0.5), state)

    def test_fourth_order(self):
        def error(dt):
            steps = int(round(1.0 / dt))
            return abs(integrate(lambda x: -x, [1.0], dt, steps)[-1, 0] - math.exp(-1.0))

        ratio = error(0.02) / error(0.01)
        assert 13.0 < ratio < 19.0

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            rk4_step(lambda x: x, [1.0], 0.0)

    def test_non_finite_step(self):
        with pytest.raises(IntegrationError):
            rk4_step(lambda x: np.full_like(x, np.inf), [1.0], 0.1)

    def test_integrate_reports_the_failing_step(self):
        def rhs(x):
            return np.where(x > 2.0, np.nan, 1.0)

        with pytest.raises(IntegrationError) as excinfo:
            integrate(rhs, [0.0], 1.0, 10)
        assert excinfo.value.step == 3

    def test_integrate_sampling(self):
        out = integrate(lambda x: np.ones_like(x), [0.0], 0.1, 10, sample_every=5)
        np.testing.assert_allclose(out[:, 0], [0.0, 0.5, 1.0])

    def test_lv_first_integral_is_conserved(self):
        spec = SystemSpec.lotka_volterra()
        states = integrate(spec.rhs, spec.x0, spec.dt, spec.steps)
        V = lv_first_integral(states)
        assert np.max(np.abs(V - V[0])) < 1e-5


class TestGenerate:
    @pytest.mark.parametrize(
        "name, rows, n_in, n_out",
        [("lorenz", 1000, 3, 3), ("lotka_volterra", 300, 2, 2), ("fisher_kpp", 264, 3, 1)],
    )
    def test_shapes(self, name, rows, n_in, n_out):
        data = generate_dataset(SystemSpec.named(name))
        assert len(data) == rows
        assert data.n_inputs == n_in
        assert data.n_outputs == n_out

    def test_noise_free_targets_are_exact(self):
        spec = SystemSpec.lorenz()
        data = generate_dataset(spec)
        np.testing.assert_array_equal(data.X[0], spec.x0)
        np.testing.assert_array_equal(data.Y, np.array([lorenz_rhs(x) for x in data.X]))

    def test_lorenz_stays_on_the_attractor(self):
        X = generate_dataset(SystemSpec.lorenz()).X
        assert np.all(np.abs(X[:, :2]) < 40.0)
        assert np.all((X[:, 2] > 0.0) & (X[:, 2] < 60.0))

    def test_noise_statistics(self):
        spec = SystemSpec.lorenz()
        clean = generate_dataset(spec)
        noisy = generate_dataset(spec, noise_sigma=0.1, seed=7)
        np.testing.assert_array_equal(noisy.X, clean.X)
        residual = noisy.Y - clean.Y
        assert abs(residual.mean()) < 0.01
        assert 0.09 < residual.std() < 0.11

    def test_deterministic_in_seed(self):
        spec = SystemSpec.lotka_volterra()
        a = generate_dataset(spec, noise_sigma=0.1, seed=3)
        b = generate_dataset(spec, noise_sigma=0.1, seed=3)
        c = generate_dataset(spec, noise_sigma=0.1, seed=4)
        assert np.array_equal(a.Y, b.Y)
        assert not np.array_equal(a.Y, c.Y)

    def test_fisher_windows(self):
        spec = SystemSpec.fisher_kpp()
        data = generate_dataset(spec)
        np.testing.assert_array_equal(data.X[:24, 1], spec.x0[1:-1])
        np.testing.assert_array_equal(data.X[:24, 0], spec.x0[:-2])
        np.testing.assert_allclose(data.Y[:24, 0], fisher_rhs(spec.x0, spec.dx)[1:-1])
        assert data.meta["dx"] == pytest.approx(0.04)
        assert data.meta["system"] == "fisher_kpp"

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            generate_dataset(SystemSpec.lorenz(), noise_sigma=-1.0)


class TestSystemSpec:
    def test_unknown_name(self):
        with pytest.raises(StructuralError):
            SystemSpec.named("duffing")

    def test_sample_counts(self):
        assert SystemSpec.lorenz().n_samples == 1000
        assert SystemSpec.lotka_volterra().n_samples == 300
        assert SystemSpec.fisher_kpp().n_samples == 11

    def test_rejects_bad_schedule(self):
        with pytest.raises(StructuralError):
            SystemSpec("lorenz", {}, [0.0, 0.0, 0.0], dt=0.0, steps=10)


class TestDataset:
    def test_row_mismatch(self):
        with pytest.raises(StructuralError):
            Dataset(np.zeros((3, 2)), np.zeros(2))

    def test_non_finite(self):
        with pytest.raises(StructuralError):
            Dataset(np.zeros((2, 1)), [0.0, np.nan])

    def test_columns(self):
        assert Dataset(np.zeros((1, 2)), np.zeros((1, 2))).columns == ["x1", "x2", "y1", "y2"]

    def test_target(self):
        data = Dataset(np.zeros((2, 1)), [[1.0, 2.0], [3.0, 4.0]])
        assert list(data.target(1).Y[:, 0]) == [2.0, 4.0]
        with pytest.raises(StructuralError):
            data.target(2)

    def test_split(self):
        data = Dataset(np.arange(1000.0)[:, None], np.zeros(1000))
        train, val = data.split(0.9, seed=0)
        assert (len(train), len(val)) == (900, 100)
        rows = np.sort(np.concatenate([train.X[:, 0], val.X[:, 0]]))
        assert np.array_equal(rows, data.X[:, 0])
        again, _ = data.split(0.9, seed=0)
        assert np.array_equal(again.X, train.X)
