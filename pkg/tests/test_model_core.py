"""Density, score, and weight contracts shared by every model."""

import numpy as np
import pytest
from scipy import integrate, stats

from osiwae import rng as rngmod
from osiwae.harness.checks import max_fd_error_weight_gradient
from osiwae.models import build_model
from osiwae.models.growth import GrowthModel
from osiwae.models.lgssm import LinearGaussianModel, OptimalLgssmProposal
from osiwae.models.slam import SlamModel
from osiwae.params import ParamVector
from osiwae.ssm import BootstrapProposal, GaussianProposal, grad_log_weight, log_weight, propose


def lgssm_1d(a=1.0, b=1.0, su=1.0, sv=1.0):
    model = LinearGaussianModel(1, trans_std=su, obs_std=sv)
    theta = ParamVector(np.array([a, b]), n_model=2)
    return model, theta


class TestLogTransition:
    def test_standard_normal_value(self):
        model, theta = lgssm_1d()
        got = model.log_transition(theta, np.array([[0.0]]), np.array([[0.0]]), 1)[0]
        assert got == pytest.approx(stats.norm.logpdf(0.0, 0.0, 1.0), abs=1e-12)
        assert got == pytest.approx(-0.9189385332046727, abs=1e-10)

    def test_translation_invariance(self):
        model, theta = lgssm_1d()
        for c in (-3.7, 0.2, 11.0):
            got = model.log_transition(theta, np.array([[c]]), np.array([[c]]), 1)[0]
            assert got == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)

    def test_growth_drift_at_time_one(self):
        # drift at x=0 for the step into t=1 is alpha2 * cos(0) = 8
        model = GrowthModel()
        theta = ParamVector(np.array([0.5, 0.05, 0.5 * np.log(10.0)]), n_model=3)
        got = model.log_transition(theta, np.array([[0.0]]), np.array([[8.0]]), 1)[0]
        assert got == pytest.approx(stats.norm.logpdf(8.0, 8.0, np.sqrt(10.0)), abs=1e-12)

    def test_dimension_mismatch_is_hard_error(self):
        model, theta = lgssm_1d()
        with pytest.raises(ValueError):
            model.log_transition(theta, np.zeros((1, 2)), np.zeros((1, 2)), 1)


class TestLogEmission:
    def test_standard_normal_value(self):
        model, theta = lgssm_1d()
        got = model.log_emission(theta, np.array([[0.0]]), np.array([0.0]))[0]
        assert got == pytest.approx(stats.norm.logpdf(0.0), abs=1e-12)

    def test_growth_zero_residual(self):
        model = GrowthModel(obs_std=1.0)
        theta = ParamVector(np.array([0.5, 0.05, 0.0]), n_model=3)
        got = model.log_emission(theta, np.array([[0.0]]), np.array([0.0]))[0]
        assert got == pytest.approx(stats.norm.logpdf(0.0), abs=1e-12)

    def test_slam_zero_residual(self):
        # landmark at (1, 0), robot at origin: predicted (range, bearing) is
        # exactly (1, 0), so the observation (1, 0) has zero residual
        model = SlamModel(1, motion_std=1.0, obs_std=np.sqrt(0.1))
        theta = ParamVector(np.array([1.0, 0.0]), n_model=2)
        got = model.log_emission(theta, np.array([[0.0, 0.0]]), np.array([1.0, 0.0]))[0]
        expected = 2 * stats.norm.logpdf(0.0, scale=np.sqrt(0.1))
        assert got == pytest.approx(expected, abs=1e-12)


class TestScores:
    def test_proposal_block_is_exactly_zero(self):
        bundle = build_model("lgssm", {"dx": 2, "hidden": 8})
        model, theta = bundle.model, bundle.theta
        gen = rngmod.stream(0)
        x, xp = gen.standard_normal((2, 5, 2))
        y = gen.standard_normal(2)
        assert not model.score_transition(theta, x, xp, 1)[:, theta.n_model:].any()
        assert not model.score_emission(theta, xp, y)[:, theta.n_model:].any()

    def test_transition_score_closed_form(self):
        model, theta = lgssm_1d(a=1.0, su=1.0)
        got = model.score_transition(theta, np.array([[2.0]]), np.array([[2.0]]), 1)
        assert got[0, 0] == 0.0
        got = model.score_transition(theta, np.array([[1.0]]), np.array([[3.0]]), 1)
        assert got[0, 0] == pytest.approx(2.0, abs=1e-14)

    def test_emission_score_closed_form(self):
        model, theta = lgssm_1d(b=0.5, sv=2.0)
        x, y = 3.0, 4.0
        got = model.score_emission(theta, np.array([[x]]), np.array([y]))
        assert got[0, 1] == pytest.approx((y - 0.5 * x) * x / 4.0, abs=1e-14)


class _FixedProposal(GaussianProposal):
    """Constant mean/scale, no parameters; for affine reparameterization checks."""

    n_proposal = 0

    def __init__(self, mean, std):
        self.mean_value, self.std_value = float(mean), float(std)

    def mean_std(self, theta, x, y, t):
        shape = (x.shape[0], 1)
        return np.full(shape, self.mean_value), np.full(shape, self.std_value), None

    def accumulate_grad(self, theta, x, y, t, cache, cm, cs, out, blocks=()):
        pass


class TestPropose:
    def test_zero_noise_returns_the_mean(self):
        model, theta = lgssm_1d(a=0.7)
        proposal = OptimalLgssmProposal(model)
        x = np.array([[1.3]])
        y = np.array([0.4])
        mean, _, _ = proposal.mean_std(theta, x, y, 1)
        got = propose(model, proposal, theta, x, y, 1, np.zeros((1, 1)))
        np.testing.assert_array_equal(got, mean)

    def test_bootstrap_is_drift_plus_scaled_noise(self):
        model, theta = lgssm_1d(a=0.8, su=0.5)
        proposal = BootstrapProposal(model)
        got = propose(model, proposal, theta, np.array([[2.0]]), np.array([0.0]), 1,
                      np.array([[1.5]]))
        assert got[0, 0] == pytest.approx(0.8 * 2.0 + 0.5 * 1.5, abs=1e-15)

    def test_affine_reparameterization(self):
        model, theta = lgssm_1d()
        got = propose(model, _FixedProposal(1.0, 2.0), theta, np.zeros((1, 1)),
                      np.array([0.0]), 1, np.array([[1.5]]))
        assert got[0, 0] == 4.0


class TestLogWeight:
    def test_bootstrap_weight_is_the_emission(self):
        model, theta = lgssm_1d(a=0.9, su=0.7, sv=0.4)
        proposal = BootstrapProposal(model)
        gen = rngmod.stream(1)
        x = gen.standard_normal((6, 1))
        u = gen.standard_normal((6, 1))
        y = np.array([0.8])
        xp, lw = log_weight(model, proposal, theta, x, y, 1, u)
        np.testing.assert_allclose(lw, model.log_emission(theta, xp, y), atol=1e-12)

    def test_optimal_weight_matches_quadrature(self):
        # the optimal-proposal weight equals the local likelihood
        # int g(y|x') m(x'|x) dx', checked against numerical integration
        model, theta = lgssm_1d(a=0.9, b=1.2, su=0.6, sv=0.8)
        proposal = OptimalLgssmProposal(model)
        x, y = 0.7, 1.1
        _, lw = log_weight(model, proposal, theta, np.array([[x]]), np.array([y]), 1,
                           np.array([[0.33]]))
        closed_form = stats.norm.logpdf(y, 1.2 * 0.9 * x, np.sqrt(1.2**2 * 0.6**2 + 0.8**2))
        assert lw[0] == pytest.approx(closed_form, abs=1e-10)

        def integrand(xp):
            return stats.norm.pdf(y, 1.2 * xp, 0.8) * stats.norm.pdf(xp, 0.9 * x, 0.6)

        quad, _ = integrate.quad(integrand, -20, 20)
        assert lw[0] == pytest.approx(np.log(quad), abs=1e-8)

    def test_optimal_weight_constant_in_noise(self):
        model, theta = lgssm_1d(a=0.9, b=1.2, su=0.6, sv=0.8)
        proposal = OptimalLgssmProposal(model)
        us = rngmod.stream(2).standard_normal((200, 1))
        x = np.full((200, 1), 0.7)
        _, lw = log_weight(model, proposal, theta, x, np.array([1.1]), 1, us)
        assert lw.std() < 1e-10

    def test_weights_are_positive_and_finite(self):
        for kind, cfg in [("lgssm", {"dx": 2, "hidden": 8}),
                          ("slam", {"n_landmarks": 2, "hidden": 8}),
                          ("growth", {"hidden": 8})]:
            bundle = build_model(kind, cfg)
            gen = rngmod.stream(3)
            x = bundle.model.sample_initial(50, gen)
            u = gen.standard_normal((50, bundle.model.d_x))
            y = bundle.model.sample_emission(bundle.theta_true,
                                             bundle.model.sample_initial(1, gen), 1, gen)[0]
            _, lw = log_weight(bundle.model, bundle.proposal, bundle.theta, x, y, 1, u)
            assert np.all(np.isfinite(lw))


class TestGradLogWeight:
    @pytest.mark.parametrize("kind,cfg", [
        ("lgssm", {"dx": 2, "hidden": 8}),
        ("lgssm", {"dx": 2, "proposal": "bootstrap"}),
        ("lgssm", {"dx": 2, "proposal": "optimal"}),
        ("slam", {"n_landmarks": 2, "hidden": 8}),
        ("growth", {"hidden": 8}),
        ("growth", {"proposal": "bootstrap"}),
    ])
    def test_matches_finite_differences(self, kind, cfg):
        assert max_fd_error_weight_gradient(kind, cfg, n_points=10, seed=8) < 1e-5

    def test_model_block_is_plain_score_for_state_free_features(self):
        # with (x, y) features the proposal contributes nothing to the model
        # block, leaving exactly the transition and emission scores
        bundle = build_model("lgssm", {"dx": 2, "hidden": 8})
        model, proposal, theta = bundle.model, bundle.proposal, bundle.theta
        gen = rngmod.stream(4)
        x = gen.standard_normal((4, 2))
        u = gen.standard_normal((4, 2))
        y = gen.standard_normal(2)
        xp, _, grad = grad_log_weight(model, proposal, theta, x, y, 1, u)
        expected = (model.score_transition(theta, x, xp, 1)
                    + model.score_emission(theta, xp, y))[:, : theta.n_model]
        np.testing.assert_allclose(grad[:, : theta.n_model], expected, atol=1e-12)

    def test_identity_grad_w_equals_w_grad_log_w(self):
        # the linear-domain identity holds because grad(w) is computed as
        # w * grad(log w); spot-check by finite differences of exp(log w)
        model, theta = lgssm_1d(a=0.8, b=1.1, su=0.5, sv=0.6)
        proposal = BootstrapProposal(model)
        x = np.array([[0.4]])
        u = np.array([[0.2]])
        y = np.array([0.9])
        _, lw, glw = grad_log_weight(model, proposal, theta, x, y, 1, u)
        h = 1e-6
        for k in range(2):
            bumped = theta.values.copy()
            bumped[k] += h
            _, hi = log_weight(model, proposal, ParamVector(bumped, 2), x, y, 1, u)
            bumped[k] = theta.values[k] - h
            _, lo = log_weight(model, proposal, ParamVector(bumped, 2), x, y, 1, u)
            fd_w = (np.exp(hi[0]) - np.exp(lo[0])) / (2 * h)
            assert np.exp(lw[0]) * glw[0, k] == pytest.approx(fd_w, rel=1e-6)

    def test_nonfinite_proposal_output_is_hard_error(self):
        model, theta = lgssm_1d()
        with pytest.raises(FloatingPointError):
            propose(model, _FixedProposal(np.inf, 1.0), theta, np.zeros((1, 1)),
                    np.array([0.0]), 1, np.zeros((1, 1)))
