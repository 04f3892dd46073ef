import numpy as np
import pytest

import mathoNet.trainer as trainer
from mathoNet.bayes import RegState
from mathoNet.benchmarks import Dataset
from mathoNet.config import TrainConfig
from mathoNet.errors import AllRunsDivergedError, ConfigError, DivergenceError
from mathoNet.network import MathONet, count_active_connections
from mathoNet.trainer import (
    BAYES_LABEL,
    SGL_LABEL,
    Adam,
    Candidate,
    MomentumSGD,
    build_model,
    discover,
    estimate_sigma2,
    iter_batches,
    run_cycle,
    run_discovery,
    select_model,
    train_epoch,
)
from toy_models import PowerModel


@pytest.fixture
def line_data():
    x = np.linspace(-1.0, 1.0, 40)
    return Dataset(x[:, None], 2.0 * x + 0.5)


@pytest.fixture
def small_config():
    return TrainConfig(
        hidden=[1],
        unary_set=["identity"],
        lam=1e-3,
        lambda_grid=[1e-3],
        decay_every=3,
        n_cycle=3,
        batch_size=8,
        restarts=1,
        learning_rate=1e-2,
    )


class TestSelectModel:
    def test_fewer_terms_within_tolerance(self):
        assert select_model([(2, 1.0), (5, 0.95)], 1.1) == Candidate(2, 1.0)

    def test_accuracy_outside_tolerance_wins(self):
        assert select_model([(2, 2.0), (5, 1.0)], 1.1) == Candidate(5, 1.0)

    def test_ties_go_to_lower_seed(self):
        chosen = select_model([(2, 1.0, "b", 3), (2, 1.0, "a", 1)])
        assert chosen.model == "a"

    def test_accuracy_mode(self):
        chosen = select_model([(2, 1.0), (5, 0.95)], 1.1, mode="accuracy")
        assert chosen.term_count == 5

    def test_non_finite_candidates_are_skipped(self):
        assert select_model([(1, float("nan")), (4, 3.0)]).term_count == 4
        with pytest.raises(ValueError):
            select_model([(1, float("inf"))])


class TestEstimateSigma2:
    def test_residual(self):
        data = Dataset([[1.0], [2.0]], [3.0, 3.0])
        assert estimate_sigma2(PowerModel(2.0), data) == pytest.approx(1.0)

    def test_floor(self):
        data = Dataset([[1.0], [2.0]], [2.0, 4.0])
        assert estimate_sigma2(PowerModel(2.0), data, floor=1e-6) == 1e-6

    def test_fixed(self):
        data = Dataset([[1.0]], [0.0])
        assert estimate_sigma2(PowerModel(2.0), data, mode="fixed", sigma2=0.25) == 0.25


class TestOptimizers:
    def test_plain_sgd_step(self):
        weights = np.array([1.0])
        MomentumSGD(1, 0.1, 0.0).step(weights, np.array([9.0]))
        assert weights[0] == pytest.approx(0.1)

    def test_momentum_accumulates(self):
        weights = np.zeros(1)
        sgd = MomentumSGD(1, 1.0, 0.5)
        sgd.step(weights, np.array([1.0]))
        sgd.step(weights, np.array([1.0]))
        assert weights[0] == pytest.approx(-2.5)

    def test_adam_first_step_is_learning_rate_sized(self):
        weights = np.zeros(3)
        Adam(3, 0.01).step(weights, np.array([5.0, -0.2, 0.0]))
        np.testing.assert_allclose(weights, [-0.01, 0.01, 0.0], rtol=1e-6)

    def test_reset_forgets_frozen_weights(self):
        adam = Adam(2)
        adam.step(np.zeros(2), np.ones(2))
        adam.reset(np.array([True, False]))
        assert adam.m[0] == 0.0 and adam.v[0] == 0.0
        assert adam.m[1] > 0.0


def test_iter_batches_cover_every_row(rng):
    batches = list(iter_batches(10, 3, rng))
    assert [len(b) for b in batches] == [3, 3, 3, 1]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


class TestTrainEpoch:
    def test_unpenalized_gradient_step(self):
        model = PowerModel(0.0)
        reg = RegState.initial(1, 1, lam=0.0, lam_g=0.0)
        batches = [(np.array([[1.0], [2.0]]), np.array([3.0, 6.0]))]
        train_epoch(model, reg, batches, MomentumSGD(1, 0.1, 0.0))
        # mean energy gradient: -(1*3 + 2*6) / 2
        assert model.weights[0] == pytest.approx(0.75)

    def test_fully_masked_model_is_left_alone(self):
        model = PowerModel(0.5)
        model.mask[0] = 0.0
        reg = RegState.initial(1, 1)
        train_epoch(model, reg, [(np.ones((1, 1)), np.ones(1))], MomentumSGD(1, 0.1))
        assert model.weights[0] == 0.5

    def test_masked_weights_stay_zero(self, rng):
        net = MathONet.random(2, [2], ["identity", "sin"], rng=rng)
        net.mask[::2] = 0.0
        net.apply_masks()
        reg = RegState.initial(net.n_weights, net.n_groups, lam=1e-3, lam_g=1e-3)
        X = rng.uniform(-1, 1, size=(16, 2))
        train_epoch(net, reg, [(X, X[:, 0])], Adam(net.n_weights, 0.01))
        assert not np.any(net.weights[net.effective_mask() == 0])

    def test_penalty_shrinks_towards_zero(self):
        model = PowerModel(1.0)
        reg = RegState.initial(1, 1, lam=1.0, lam_g=0.0)
        X = np.array([[1.0]])
        train_epoch(model, reg, [(X, np.array([1.0]))], MomentumSGD(1, 0.1, 0.0), sgl=True)
        assert model.weights[0] == pytest.approx(0.9)

    def test_divergence(self):
        model = PowerModel(1e200)
        reg = RegState.initial(1, 1, lam=0.0, lam_g=0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError):
                train_epoch(
                    model, reg, [(np.full((1, 1), 1e200), np.zeros(1))], MomentumSGD(1, 0.1), epoch=4
                )


class TestRunCycle:
    def test_first_cycle_ignores_the_bayesian_weighting(self, line_data, small_config):
        train, val = line_data.split(0.8, 0)
        results = []
        for beta in (1.0, 5.0):
            net = MathONet.random(1, [1], ["identity"], rng=np.random.default_rng(5))
            reg = RegState.initial(net.n_weights, net.n_groups, lam=1e-3, lam_g=1e-3)
            reg.beta[:] = beta
            reg.beta_g[:] = beta
            run_cycle(
                net, reg, train, val, small_config,
                cycle=1, optimizer=Adam(net.n_weights, 1e-2),
                rng=np.random.default_rng(9), final=True,
            )
            results.append(net.weights.copy())
        assert np.array_equal(results[0], results[1])

    def test_zero_network_is_pruned_entirely(self, line_data, small_config):
        train, val = line_data.split(0.8, 0)
        net = MathONet(1, [1], ["identity"])
        reg = RegState.initial(net.n_weights, net.n_groups)
        net, reg, record = run_cycle(
            net, reg, train, val, small_config,
            cycle=1, optimizer=Adam(net.n_weights), rng=np.random.default_rng(0),
        )
        assert record.term_count == 0
        assert record.expression == "0"
        assert count_active_connections(net) == 0
        assert not np.any(net.effective_mask())

    def test_masks_only_shrink(self, line_data, small_config, rng):
        train, val = line_data.split(0.8, 0)
        net = MathONet.random(1, [1], ["identity"], rng=rng)
        reg = RegState.initial(net.n_weights, net.n_groups, lam=1e-3, lam_g=1e-3)
        optimizer = Adam(net.n_weights, 1e-2)
        previous = net.effective_mask().copy()
        for cycle in range(1, 4):
            net, reg, record = run_cycle(
                net, reg, train, val, small_config, cycle=cycle, optimizer=optimizer, rng=rng
            )
            current = net.effective_mask()
            assert np.all(current <= previous)
            assert record.cycle == cycle
            assert len(record.mask) == net.n_weights
            previous = current.copy()

    def test_penalty_decays_across_cycles(self, line_data, small_config, rng):
        train, val = line_data.split(0.8, 0)
        net = MathONet.random(1, [1], ["identity"], rng=rng)
        reg = RegState.initial(net.n_weights, net.n_groups, lam=1e-3, lam_g=1e-3)
        optimizer = Adam(net.n_weights, 1e-2)
        for cycle in (1, 2):
            net, reg, _ = run_cycle(
                net, reg, train, val, small_config, cycle=cycle, optimizer=optimizer, rng=rng
            )
        assert reg.lam == pytest.approx(1e-4)
        assert reg.lam_g == pytest.approx(1e-4)

    def test_cycles_count_from_one(self, line_data, small_config, rng):
        net = MathONet(1, [1], ["identity"])
        with pytest.raises(ValueError):
            run_cycle(
                net, RegState.initial(net.n_weights, net.n_groups), line_data, line_data,
                small_config, cycle=0, optimizer=Adam(net.n_weights), rng=rng,
            )


def _without_elapsed(run):
    data = run.to_dict()
    for cycle in data["cycles"]:
        cycle.pop("elapsed")
    return data


class TestDiscovery:
    def test_run_is_deterministic(self, line_data, small_config):
        train, val = line_data.split(0.8, 0)
        a = run_discovery(train, val, small_config, lam_index=0, restart=2)
        b = run_discovery(train, val, small_config, lam_index=0, restart=2)
        assert a.ok
        assert len(a.cycles) == 3
        assert _without_elapsed(a) == _without_elapsed(b)
        assert a.model == b.model

    def test_single_cycle_is_the_lasso_baseline(self, line_data, small_config):
        report = discover(line_data, small_config.replace(n_cycle=1, restarts=2))
        assert report.label == SGL_LABEL
        assert [run.seed for run in report.runs] == [0, 1]
        assert report.winner["term_count"] == report.winner_run.final.term_count
        assert report.names == ["x"]
        assert report.winner_model is not None

    def test_runs_are_ordered_by_penalty_then_seed(self, line_data, small_config):
        config = small_config.replace(lambda_grid=[1e-2, 1e-4], restarts=2, n_cycle=2)
        report = discover(line_data, config)
        assert report.label == BAYES_LABEL
        assert [(run.lam, run.seed) for run in report.runs] == [
            (1e-4, 0), (1e-4, 1), (1e-2, 0), (1e-2, 1)
        ]
        assert len(report.history) == 2

    def test_all_runs_diverged(self, line_data, small_config, monkeypatch):
        def explode(*args, **kwargs):
            raise DivergenceError(0)

        monkeypatch.setattr(trainer, "run_cycle", explode)
        with pytest.raises(AllRunsDivergedError) as excinfo:
            discover(line_data, small_config.replace(restarts=2))
        report = excinfo.value.report
        assert [run.status for run in report.runs] == ["diverged", "diverged"]
        assert report.winner is None

    def test_zero_target_gives_the_empty_expression(self, line_data, small_config):
        data = Dataset(line_data.X, np.zeros(len(line_data)))
        report = discover(data, small_config.replace(lam=1e-2, lambda_grid=[1e-2]))
        assert report.winner["expression"] == "0"
        assert report.winner["term_count"] == 0
        assert report.winner["coefficients"] == {}

    def test_stencil_model_needs_grid_spacing(self, small_config, rng):
        data = Dataset(np.zeros((4, 3)), np.zeros(4))
        with pytest.raises(ConfigError):
            build_model(small_config.replace(model="stencil"), data, rng)
