"""Diagonal linear Gaussian state-space model.

x_t = A x_{t-1} + S_u u_t,  y_t = B x_t + S_v v_t, with A, B, S_u, S_v all
diagonal.  The learnable model block holds the diagonals of A and B; the
noise scales are fixed.  With learn_model=False the coefficient diagonals
are frozen into the model and the model block is empty (proposal-only
learning).
"""

from __future__ import annotations

import numpy as np

from ..params import MODEL_BLOCK, ParamVector
from ..ssm import ALL_BLOCKS, LOG_2PI, GaussianProposal, StateSpaceModel, check_states


class LinearGaussianModel(StateSpaceModel):
    def __init__(self, d: int, trans_std, obs_std, learn_model: bool = True,
                 fixed_coeff_a=None, fixed_coeff_b=None):
        self.d_x = int(d)
        self.d_y = int(d)
        self.trans_std = _as_diag(trans_std, d)
        self.obs_std = _as_diag(obs_std, d)
        # zero transition scale is allowed for simulation (deterministic
        # dynamics); densities are only defined for positive scales
        if np.any(self.trans_std < 0) or np.any(self.obs_std <= 0):
            raise ValueError("noise scales must be positive")
        self.learn_model = bool(learn_model)
        self.n_model = 2 * d if self.learn_model else 0
        if not self.learn_model:
            self.fixed_a = _as_diag(fixed_coeff_a, d)
            self.fixed_b = _as_diag(fixed_coeff_b, d)
        self.theta1_names = tuple(f"a{k}" for k in range(d)) + tuple(f"b{k}" for k in range(d)) \
            if self.learn_model else ()
        self.initial_mean = np.zeros(d)
        self.initial_std = np.ones(d)
        self.n_proposal_features = 2 * d

    def coeffs(self, theta: ParamVector):
        """Diagonals (a, b) of the transition and observation matrices."""
        if self.learn_model:
            return theta.model[: self.d_x], theta.model[self.d_x:]
        return self.fixed_a, self.fixed_b

    # transitions

    def transition_drift(self, theta, x, t):
        a, _ = self.coeffs(theta)
        return a * x

    def transition_log_std(self, theta):
        with np.errstate(divide="ignore"):
            return np.log(self.trans_std)

    def score_transition(self, theta, x, x_next, t):
        x = check_states(x, self.d_x)
        x_next = check_states(x_next, self.d_x)
        out = np.zeros((x.shape[0], theta.size))
        if self.learn_model:
            a, _ = self.coeffs(theta)
            out[:, : self.d_x] = (x_next - a * x) * x / self.trans_std**2
        return out

    def accumulate_drift_grad(self, theta, x, t, coeff, out):
        if self.learn_model:
            out[:, : self.d_x] += coeff * x

    def accumulate_transition_logstd_grad(self, theta, coeff, out):
        pass  # transition scale is fixed

    # emissions

    def log_emission(self, theta, x_next, y):
        x_next = check_states(x_next, self.d_x)
        _, b = self.coeffs(theta)
        z = (y - b * x_next) / self.obs_std
        return -0.5 * (z * z).sum(axis=1) - np.log(self.obs_std).sum() - 0.5 * self.d_y * LOG_2PI

    def score_emission(self, theta, x_next, y):
        x_next = check_states(x_next, self.d_x)
        out = np.zeros((x_next.shape[0], theta.size))
        if self.learn_model:
            _, b = self.coeffs(theta)
            out[:, self.d_x: 2 * self.d_x] = (y - b * x_next) * x_next / self.obs_std**2
        return out

    def grad_xnext_log_emission(self, theta, x_next, y):
        _, b = self.coeffs(theta)
        return b * (y - b * x_next) / self.obs_std**2

    def sample_emission(self, theta, x, t, rng):
        _, b = self.coeffs(theta)
        return b * x + self.obs_std * rng.standard_normal(x.shape)


class OptimalLgssmProposal(GaussianProposal):
    """Exact conditional p(x' | x, y); importance weights are constant in u.

    Available in closed form thanks to the Gaussian conjugacy of the
    diagonal model; depends on theta only through the coefficient diagonals.
    """

    n_proposal = 0

    def __init__(self, model: LinearGaussianModel):
        self.model = model

    def _moments(self, theta, x, y):
        a, b = self.model.coeffs(theta)
        su2 = self.model.trans_std**2
        sv2 = self.model.obs_std**2
        var = 1.0 / (1.0 / su2 + b * b / sv2)
        mean = var * (a * x / su2 + b * y / sv2)
        return mean, var, a, b, su2, sv2

    def mean_std(self, theta, x, y, t):
        mean, var, *_ = self._moments(theta, x, y)
        std = np.broadcast_to(np.sqrt(var), mean.shape)
        return mean, std, None

    def accumulate_grad(self, theta, x, y, t, cache, coeff_mean, coeff_logstd, out, blocks=ALL_BLOCKS):
        if MODEL_BLOCK not in blocks or not self.model.learn_model:
            return
        mean, var, a, b, su2, sv2 = self._moments(theta, x, y)
        d = self.model.d_x
        # d mean / d a_k and the b-dependence through both mean and variance
        out[:, :d] += coeff_mean * var * x / su2
        dvar_db = -(var * var) * 2.0 * b / sv2
        dmean_db = dvar_db * (mean / var) + var * y / sv2
        dlogstd_db = dvar_db / (2.0 * var)
        out[:, d: 2 * d] += coeff_mean * dmean_db + coeff_logstd * dlogstd_db


def _as_diag(value, d):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(d, float(arr))
    if arr.shape != (d,):
        raise ValueError(f"expected scalar or length-{d} diagonal, got shape {arr.shape}")
    return arr
