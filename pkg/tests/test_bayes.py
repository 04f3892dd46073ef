import numpy as np
import pytest

from mathoNet.bayes import (
    MaskDecision,
    RegState,
    evidence_update,
    loss_bayes,
    loss_sgl,
    penalty_subgradient,
    prox_sparse_group,
    update_alpha_beta,
    update_group_alpha,
    update_masks,
    update_nu,
    update_zeta,
)


class TestZeta:
    def test_no_curvature(self):
        assert update_zeta(1.0, 0.0) == 1.0

    def test_direct(self):
        assert update_zeta(2.0, 1.0) == pytest.approx(2.0 / 3.0)

    def test_tiny_prior_large_curvature(self):
        zeta = update_zeta(1e-9, 1e9)
        assert zeta == pytest.approx(5e-10)
        assert 0.0 < zeta <= 1e-9

    def test_dead_weight(self):
        assert update_zeta(0.0, 3.0) == 0.0

    def test_sandwich(self, rng):
        nu = 10.0 ** rng.uniform(-4, 4, size=1000)
        H = np.concatenate([[0.0] * 10, 10.0 ** rng.uniform(-4, 8, size=990)])
        zeta = update_zeta(nu, H)
        assert np.all(zeta > 0.0)
        assert np.all(zeta <= nu)
        assert np.all(zeta[:10] == nu[:10])
        assert np.all(zeta[10:] < nu[10:])


class TestAlphaBeta:
    def test_zero_curvature_limit(self):
        alpha, beta = update_alpha_beta(1.0, 1.0)
        assert alpha == 0.0
        assert beta == 1e-6

    def test_direct(self):
        alpha, beta = update_alpha_beta(2.0, 2.0 / 3.0)
        assert alpha == pytest.approx(1.0 / 3.0)
        assert beta == pytest.approx(0.57735, abs=1e-5)

    def test_vanishing_prior(self):
        alpha, _ = update_alpha_beta(1e-12, 1e-13)
        assert alpha > 1e3
        alpha, beta = update_alpha_beta(0.0, 0.0)
        assert alpha == np.inf
        assert beta == 1e6

    def test_non_negative_under_gauss_newton(self, rng):
        nu = 10.0 ** rng.uniform(-6, 3, size=500)
        H = 10.0 ** rng.uniform(-6, 6, size=500)
        alpha, _ = update_alpha_beta(nu, update_zeta(nu, H))
        assert np.all(alpha >= 0.0)

    def test_group(self):
        assert update_group_alpha(1.0, [0.5, 0.5]) == pytest.approx((1.0, 1.0))
        assert update_group_alpha(1.0, [1.0, 1.0]) == (0.0, 1e-6)

    def test_singleton_group_reduces(self):
        alpha_g, beta_g = update_group_alpha(2.0, [2.0 / 3.0])
        alpha, beta = update_alpha_beta(2.0, 2.0 / 3.0)
        assert alpha_g == pytest.approx(alpha)
        assert beta_g == pytest.approx(beta)


def test_update_nu():
    W = np.array([0.0, 3.0, 3.0, 4.0])
    nu, nu_g = update_nu(W, np.array([1.0, 1.5, 1.0, 1.0]), [np.array([2, 3])], np.array([5.0]))
    assert list(nu) == [0.0, 2.0, 3.0, 4.0]
    assert list(nu_g) == [1.0]


class TestMasks:
    def decide(self, alpha, alpha_g=(0.0,), prev=None, groups=None, prunable=None):
        alpha = np.asarray(alpha, dtype=float)
        prev = prev or MaskDecision.all_on(alpha.shape[0], len(alpha_g))
        groups = groups or [np.arange(alpha.shape[0])]
        return update_masks(alpha, np.asarray(alpha_g), 1e3, 1e3, prev, groups, prunable)

    def test_strict_boundary(self):
        decision = self.decide([1e3 * (1 + 1e-9), 1e3])
        assert list(decision.mask) == [0.0, 1.0]

    def test_kept_below_threshold(self):
        assert list(self.decide([1.0, 999.0]).mask) == [1.0, 1.0]

    def test_monotone(self):
        prev = MaskDecision(np.array([0.0, 1.0]), np.array([1.0]))
        assert list(self.decide([0.0, 0.0], prev=prev).mask) == [0.0, 1.0]

    def test_group_dominates(self):
        decision = self.decide(
            [0.0, 0.0, 0.0],
            alpha_g=(2e3, 0.0),
            groups=[np.array([0, 1]), np.array([2])],
        )
        assert list(decision.group_mask) == [0.0, 1.0]
        assert list(decision.mask) == [0.0, 0.0, 1.0]

    def test_unprunable_weights_follow_their_group(self):
        decision = self.decide([np.inf, np.inf], prunable=np.array([False, True]))
        assert list(decision.mask) == [1.0, 0.0]

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            update_masks(
                np.zeros(1), np.zeros(1), 0.0, 1.0, MaskDecision.all_on(1, 1), [np.array([0])]
            )


def test_dead_weight_fixpoint():
    reg = RegState.initial(3, 1)
    W = np.array([0.0, 0.5, -0.5])
    groups = [np.array([0, 1, 2])]
    reg = evidence_update(reg, W, np.ones(3), groups)
    assert reg.nu[0] == 0.0
    assert reg.alpha[0] == np.inf
    decision = update_masks(
        reg.alpha, reg.alpha_g, reg.kappa_alpha, reg.kappa_alpha_g,
        MaskDecision.all_on(3, 1), groups,
    )
    assert list(decision.mask) == [0.0, 1.0, 1.0]


def test_dead_group():
    reg = evidence_update(
        RegState.initial(2, 1), np.zeros(2), np.zeros(2), [np.array([0, 1])]
    )
    assert reg.alpha_g[0] == np.inf


class TestLosses:
    def test_sgl_zero_weights(self):
        assert loss_sgl(1.5, np.zeros(4), [np.array([0, 1])], 1.0, 1.0) == 1.5

    def test_sgl_group_norm(self):
        assert loss_sgl(0.0, np.array([3.0, 4.0]), [np.array([0, 1])], 0.0, 1.0) == 5.0

    def test_sgl_l1(self):
        assert loss_sgl(2.0, np.array([1.0, -2.0]), [], 1.0, 0.0) == 5.0

    def test_sgl_rejects_negative_penalty(self):
        with pytest.raises(ValueError):
            loss_sgl(0.0, np.zeros(1), [], -1.0, 0.0)

    def test_bayes_everything_masked(self):
        W = np.array([1.0, 2.0])
        loss = loss_bayes(
            0.7, W, np.zeros(2), np.ones(2), [np.array([0, 1])], np.zeros(1), np.ones(1), 1.0, 1.0
        )
        assert loss == 0.7

    def test_bayes_direct(self):
        loss = loss_bayes(
            0.0, np.array([1.0, -1.0]), np.ones(2), np.array([2.0, 2.0]),
            [], np.ones(0), np.ones(0), 1.0, 0.0,
        )
        assert loss == 4.0

    def test_bayes_reduces_to_sgl(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            W = rng.normal(size=n)
            cuts = np.sort(rng.choice(np.arange(1, n + 1), size=min(n, 3), replace=False))
            groups = [g for g in np.split(np.arange(n), cuts) if g.size]
            E, lam, lam_g = rng.uniform(0, 2, size=3)
            sgl = loss_sgl(E, W, groups, lam, lam_g)
            bayes = loss_bayes(
                E, W, np.ones(n), np.ones(n), groups,
                np.ones(len(groups)), np.ones(len(groups)), lam, lam_g,
            )
            assert bayes == pytest.approx(sgl, rel=1e-15, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            loss_bayes(0.0, np.ones(2), np.ones(3), np.ones(2), [], [], [], 1.0, 1.0)


class TestPenaltySteps:
    def test_soft_threshold(self):
        out = prox_sparse_group(
            np.array([1.0, -0.05]), np.full(2, 0.1), np.ones(2),
            [np.array([0, 1])], np.ones(1), 1.0, 0.0, np.ones(2),
        )
        assert out[0] == pytest.approx(0.9)
        assert out[1] == 0.0

    def test_group_shrinks_to_zero(self):
        out = prox_sparse_group(
            np.array([0.03, 0.04]), np.full(2, 0.1), np.ones(2),
            [np.array([0, 1])], np.ones(1), 0.0, 1.0, np.ones(2),
        )
        assert not np.any(out)

    def test_group_block_shrink(self):
        out = prox_sparse_group(
            np.array([3.0, 4.0]), np.full(2, 1.0), np.ones(2),
            [np.array([0, 1])], np.ones(1), 0.0, 1.0, np.ones(2),
        )
        np.testing.assert_allclose(out, [2.4, 3.2])

    def test_unprunable_weights_skip_l1(self):
        out = prox_sparse_group(
            np.array([0.05, 0.05]), np.full(2, 0.1), np.ones(2),
            [], np.ones(0), 1.0, 0.0, np.array([0.0, 1.0]),
        )
        assert list(out) == [0.05, 0.0]

    def test_subgradient(self):
        grad = penalty_subgradient(
            np.array([3.0, -4.0, 0.0]), np.full(3, 2.0), [np.array([0, 1])],
            np.ones(1), 0.5, 1.0, np.ones(3),
        )
        np.testing.assert_allclose(grad, [1.0 + 0.6, -1.0 - 0.8, 0.0])


def test_reg_state_document_keeps_infinities():
    reg = RegState.initial(2, 1, lam=1e-4, lam_g=2e-4)
    reg.alpha[1] = np.inf
    data = reg.to_dict()
    assert data["alpha"] == [0.0, None]
    back = RegState.from_dict(data)
    assert back.alpha[1] == np.inf
    assert back.lam_g == 2e-4
