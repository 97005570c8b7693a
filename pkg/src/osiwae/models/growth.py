"""Nonlinear growth benchmark model with a time-varying drift.

Dynamics: x_t = a_{t-1}(x_{t-1}) + sigma_u * u with
a_s(x) = alpha0*x + alpha1*x/(1+x^2) + alpha2*cos(1.2*s), and observations
y_t = b*x_t^2 + sigma_v * v.  The squared emission makes the locally optimal
proposal bimodal for small emission noise, which is what the adapted
proposal has to cope with.

Learnable model block: (alpha0, b, log sigma_u); alpha1, alpha2, sigma_v are
fixed.  The log_transition time argument is the index of the *arrival*
state, so the drift into time t uses cos(1.2*(t-1)).  Conditioning features
for the neural proposal are (drift, observation), which makes the features
depend on alpha0.
"""

from __future__ import annotations

import numpy as np

from ..params import ParamVector
from ..ssm import LOG_2PI, StateSpaceModel, check_states


class GrowthModel(StateSpaceModel):
    def __init__(self, alpha1: float = 25.0, alpha2: float = 8.0, obs_std: float = 1.0):
        self.alpha1 = float(alpha1)
        self.alpha2 = float(alpha2)
        self.obs_std = float(obs_std)
        if self.obs_std <= 0:
            raise ValueError("observation scale must be positive")
        self.d_x = 1
        self.d_y = 1
        self.n_model = 3
        self.theta1_names = ("alpha0", "b", "log_sigma_u")
        self.initial_mean = np.zeros(1)
        self.initial_std = np.full(1, np.sqrt(10.0))
        self.n_proposal_features = 2
        self.features_depend_on_model = True

    @staticmethod
    def split(theta: ParamVector):
        alpha0, b, log_sigma_u = theta.model
        return alpha0, b, log_sigma_u

    def transition_drift(self, theta, x, t):
        alpha0, _, _ = self.split(theta)
        x = check_states(x, 1)
        return alpha0 * x + self.alpha1 * x / (1.0 + x * x) + self.alpha2 * np.cos(1.2 * (t - 1))

    def transition_log_std(self, theta):
        _, _, log_sigma_u = self.split(theta)
        return np.array([log_sigma_u])

    def score_transition(self, theta, x, x_next, t):
        x = check_states(x, 1)
        x_next = check_states(x_next, 1)
        _, _, log_sigma_u = self.split(theta)
        drift = self.transition_drift(theta, x, t)
        z = (x_next - drift) * np.exp(-log_sigma_u)
        out = np.zeros((x.shape[0], theta.size))
        out[:, 0] = (z * np.exp(-log_sigma_u) * x)[:, 0]
        out[:, 2] = (z * z)[:, 0] - 1.0
        return out

    def accumulate_drift_grad(self, theta, x, t, coeff, out):
        out[:, 0] += coeff[:, 0] * x[:, 0]

    def accumulate_transition_logstd_grad(self, theta, coeff, out):
        out[:, 2] += coeff[:, 0]

    # emissions

    def log_emission(self, theta, x_next, y):
        x_next = check_states(x_next, 1)
        _, b, _ = self.split(theta)
        z = (np.asarray(y) - b * x_next * x_next) / self.obs_std
        return -0.5 * (z * z).sum(axis=1) - np.log(self.obs_std) - 0.5 * LOG_2PI

    def score_emission(self, theta, x_next, y):
        x_next = check_states(x_next, 1)
        _, b, _ = self.split(theta)
        sq = x_next * x_next
        out = np.zeros((x_next.shape[0], theta.size))
        out[:, 1] = ((np.asarray(y) - b * sq) * sq / self.obs_std**2)[:, 0]
        return out

    def grad_xnext_log_emission(self, theta, x_next, y):
        _, b, _ = self.split(theta)
        return (np.asarray(y) - b * x_next * x_next) * 2.0 * b * x_next / self.obs_std**2

    def sample_emission(self, theta, x, t, rng):
        _, b, _ = self.split(theta)
        return b * x * x + self.obs_std * rng.standard_normal(x.shape)

    # proposal conditioning: (drift, observation) instead of (state, observation)

    def proposal_features(self, theta, x, y, t):
        drift = self.transition_drift(theta, x, t)
        return np.concatenate([drift, np.broadcast_to(y, (x.shape[0], 1))], axis=1)

    def accumulate_feature_grad(self, theta, x, y, t, coeff, out):
        # feature 0 is the drift; its only model-block dependence is alpha0
        out[:, 0] += coeff[:, 0] * x[:, 0]

    def theta1_natural(self, theta1):
        alpha0, b, log_sigma_u = np.asarray(theta1, dtype=np.float64)
        return np.array([alpha0, b, np.exp(log_sigma_u)])
