"""Exact and brute-force references the estimators are tested against.

Kalman filtering with a Joseph-form covariance update, parameter
sensitivities by central finite differences of the filter recursion, the
closed-form one-step predictive log-likelihood and locally optimal proposal
of the linear Gaussian model, a Monte Carlo evaluation of the multi-sample
variational bound, and a grid evaluation of the growth model's optimal
kernel.  Linear solves go through Cholesky factorizations and raise on
failure; an oracle must not paper over ill-conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtering import ParticleCloud, categorical
from .models.lgssm import LinearGaussianModel
from .params import ParamVector
from .ssm import LOG_2PI, GaussianProposal, StateSpaceModel, log_weight


@dataclass
class GaussianBelief:
    """Mean and covariance of a Gaussian filter state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise ValueError("covariance shape does not match the mean")
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > 1e-12:
            raise ValueError("covariance must be symmetric")
        if d and np.linalg.eigvalsh(self.cov).min() < -1e-10:
            raise ValueError("covariance must be positive semidefinite")


@dataclass
class KalmanParams:
    """Full-matrix linear Gaussian system x' = Ax + w, y = Bx + v."""

    transition: np.ndarray   # A
    observation: np.ndarray  # B
    trans_cov: np.ndarray    # cov(w)
    obs_cov: np.ndarray      # cov(v)

    @classmethod
    def from_model(cls, model: LinearGaussianModel, theta: ParamVector) -> "KalmanParams":
        a, b = model.coeffs(theta)
        return cls(np.diag(a), np.diag(b), np.diag(model.trans_std**2), np.diag(model.obs_std**2))

    @classmethod
    def from_diagonals(cls, a, b, trans_std, obs_std) -> "KalmanParams":
        return cls(np.diag(np.atleast_1d(np.asarray(a, dtype=np.float64))),
                   np.diag(np.atleast_1d(np.asarray(b, dtype=np.float64))),
                   np.diag(np.atleast_1d(np.asarray(trans_std, dtype=np.float64))**2),
                   np.diag(np.atleast_1d(np.asarray(obs_std, dtype=np.float64))**2))


def _solve_psd(mat: np.ndarray, rhs: np.ndarray):
    """Cholesky solve; returns (solution, log det). Raises if not SPD."""
    chol = np.linalg.cholesky(mat)
    z = np.linalg.solve(chol, rhs)
    sol = np.linalg.solve(chol.T, z)
    return sol, 2.0 * np.log(np.diag(chol)).sum()


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    resid = np.atleast_1d(x - mean)
    sol, logdet = _solve_psd(cov, resid)
    return float(-0.5 * (resid @ sol + logdet + resid.size * LOG_2PI))


def kalman_step(belief: GaussianBelief, params: KalmanParams, y: np.ndarray):
    """Predict/update and the predictive log-likelihood increment.

    The update uses the Joseph form and re-symmetrizes, which keeps the
    covariance positive semidefinite over long runs.
    """
    a, b = params.transition, params.observation
    m_pred = a @ belief.mean
    p_pred = a @ belief.cov @ a.T + params.trans_cov
    innov_cov = b @ p_pred @ b.T + params.obs_cov
    resid = np.atleast_1d(y) - b @ m_pred
    sol, logdet = _solve_psd(innov_cov, resid)
    increment = float(-0.5 * (resid @ sol + logdet + resid.size * LOG_2PI))
    gain_t, _ = _solve_psd(innov_cov, b @ p_pred)
    gain = gain_t.T
    mean = m_pred + gain @ resid
    shrink = np.eye(belief.mean.size) - gain @ b
    cov = shrink @ p_pred @ shrink.T + gain @ params.obs_cov @ gain.T
    cov = 0.5 * (cov + cov.T)
    return GaussianBelief(mean, cov), increment


def kalman_filter(params: KalmanParams, ys: np.ndarray, belief0: GaussianBelief):
    """Filter a whole stream y_{0:T}; the first row is absorbed by a
    measurement-only update of the initial belief.

    Returns (means (T+1, d), increments (T+1,)); increments[0] is the
    marginal log-likelihood of y_0 under the initial belief.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    d = belief0.mean.size
    means = np.empty((ys.shape[0], d))
    increments = np.empty(ys.shape[0])
    # time-zero measurement update (no propagation)
    b = params.observation
    innov_cov = b @ belief0.cov @ b.T + params.obs_cov
    resid = ys[0] - b @ belief0.mean
    sol, logdet = _solve_psd(innov_cov, resid)
    increments[0] = -0.5 * (resid @ sol + logdet + resid.size * LOG_2PI)
    gain_t, _ = _solve_psd(innov_cov, b @ belief0.cov)
    gain = gain_t.T
    shrink = np.eye(d) - gain @ b
    belief = GaussianBelief(belief0.mean + gain @ resid,
                            0.5 * ((shrink @ belief0.cov @ shrink.T + gain @ params.obs_cov @ gain.T)
                                   + (shrink @ belief0.cov @ shrink.T + gain @ params.obs_cov @ gain.T).T))
    means[0] = belief.mean
    for t in range(1, ys.shape[0]):
        belief, increments[t] = kalman_step(belief, params, ys[t])
        means[t] = belief.mean
    return means, increments


def kalman_loglik(params: KalmanParams, ys: np.ndarray, belief0: GaussianBelief) -> float:
    return float(kalman_filter(params, ys, belief0)[1].sum())


def finite_difference_gradient(func, x0: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of a vector."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.empty(x0.size)
    for k in range(x0.size):
        bumped = x0.copy()
        bumped[k] = x0[k] + step
        hi = func(bumped)
        bumped[k] = x0[k] - step
        lo = func(bumped)
        grad[k] = (hi - lo) / (2.0 * step)
    return grad


def kalman_score(model: LinearGaussianModel, theta: ParamVector, ys: np.ndarray,
                 step: float = 1e-6) -> np.ndarray:
    """Exact-model score of log p(y_{0:T}) over the model block (a, b diagonals),
    by central finite differences of the filter recursion."""
    if not model.learn_model:
        raise ValueError("model block is empty; nothing to differentiate")
    belief0 = GaussianBelief(model.initial_mean, np.diag(model.initial_std**2))
    d = model.d_x

    def loglik(coeffs):
        params = KalmanParams.from_diagonals(coeffs[:d], coeffs[d:], model.trans_std, model.obs_std)
        return kalman_loglik(params, ys, belief0)

    return finite_difference_gradient(loglik, theta.model, step)


def exact_likfunc_lgssm(belief: GaussianBelief, params: KalmanParams, y: np.ndarray) -> float:
    """Closed-form one-step predictive log-likelihood given a Gaussian filter."""
    a, b = params.transition, params.observation
    mean = b @ (a @ belief.mean)
    cov = b @ (a @ belief.cov @ a.T + params.trans_cov) @ b.T + params.obs_cov
    return gaussian_logpdf(np.atleast_1d(y), mean, cov)


def optimal_proposal_lgssm(model: LinearGaussianModel, theta: ParamVector, x: np.ndarray,
                           y: np.ndarray):
    """Exact conditional of the next state given (x, y): mean and covariance."""
    a, b = model.coeffs(theta)
    su2, sv2 = model.trans_std**2, model.obs_std**2
    var = 1.0 / (1.0 / su2 + b * b / sv2)
    mean = var * (a * np.asarray(x, dtype=np.float64) / su2 + b * np.asarray(y) / sv2)
    return mean, np.diag(var)


def _belief_sampler(belief_or_cloud, model, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(belief_or_cloud, ParticleCloud):
        idx = categorical(belief_or_cloud.probabilities(), rng.random(n_draws))
        return belief_or_cloud.particles[idx]
    belief = belief_or_cloud
    if np.allclose(belief.cov, 0.0):
        return np.broadcast_to(belief.mean, (n_draws, belief.mean.size)).copy()
    eigval, eigvec = np.linalg.eigh(belief.cov)
    factor = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    return belief.mean + rng.standard_normal((n_draws, belief.mean.size)) @ factor.T


def mc_colbo(model: StateSpaceModel, proposal: GaussianProposal, theta: ParamVector,
             belief_or_cloud, y: np.ndarray, t_next: int, m_samples: int,
             replicates: int, rng: np.random.Generator):
    """Monte Carlo estimate of the M-sample importance-weighted bound on the
    one-step predictive log-likelihood.

    Returns (estimate, standard error) over the requested replicates.
    """
    if m_samples < 1 or replicates < 1:
        raise ValueError("need m_samples >= 1 and replicates >= 1")
    x = _belief_sampler(belief_or_cloud, model, replicates * m_samples, rng)
    u = rng.standard_normal((replicates * m_samples, model.d_x))
    _, lw = log_weight(model, proposal, theta, x, y, t_next, u)
    lw = lw.reshape(replicates, m_samples)
    peak = lw.max(axis=1, keepdims=True)
    vals = np.log(np.exp(lw - peak).mean(axis=1)) + peak[:, 0]
    se = float(vals.std(ddof=1) / np.sqrt(replicates)) if replicates > 1 else float("inf")
    return float(vals.mean()), se


def growth_optimal_logdensity(model, theta: ParamVector, x: float, y: float, t_next: int,
                              grid: np.ndarray) -> np.ndarray:
    """Unnormalized log-density of the locally optimal kernel on a grid."""
    grid_states = np.asarray(grid, dtype=np.float64).reshape(-1, 1)
    x_rep = np.full_like(grid_states, float(np.asarray(x).reshape(())))
    log_m = model.log_transition(theta, x_rep, grid_states, t_next)
    log_g = model.log_emission(theta, grid_states, np.atleast_1d(y))
    return log_m + log_g
