"""Range-bearing SLAM with unknown landmark positions.

The robot performs a planar Gaussian random walk; each observation stacks
(range, bearing) pairs to L landmarks, both corrupted by additive Gaussian
noise with a shared scale.  The learnable model block holds the flattened
landmark coordinates; motion and observation noise are known.

Bearing residuals are wrapped into (-pi, pi] and the Gaussian density is
evaluated on the wrapped residual.  With the observation scale well below
pi the probability mass lost to wrapping is negligible.
"""

from __future__ import annotations

import numpy as np

from ..params import ParamVector
from ..ssm import LOG_2PI, StateSpaceModel, check_states

TWO_PI = 2.0 * np.pi
MIN_RANGE = 1e-8


class LandmarkSingularityError(ValueError):
    """Robot coincides with a landmark; bearing undefined."""


def wrap_angle(angle):
    """Wrap into (-pi, pi]."""
    angle = np.asarray(angle, dtype=np.float64)
    wrapped = angle - TWO_PI * np.round(angle / TWO_PI)
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def slam_angle_residual(predicted, observed):
    """Wrapped bearing residual (predicted - observed) in (-pi, pi]."""
    return wrap_angle(np.asarray(predicted) - np.asarray(observed))


class SlamModel(StateSpaceModel):
    """Observation layout: y = (r_1, bearing_1, ..., r_L, bearing_L)."""

    def __init__(self, n_landmarks: int, motion_std: float, obs_std: float):
        if n_landmarks < 1:
            raise ValueError("need at least one landmark")
        if motion_std <= 0 or obs_std <= 0:
            raise ValueError("noise scales must be positive")
        self.n_landmarks = int(n_landmarks)
        self.motion_std = float(motion_std)
        self.obs_std = float(obs_std)
        self.d_x = 2
        self.d_y = 2 * self.n_landmarks
        self.n_model = 2 * self.n_landmarks
        self.theta1_names = tuple(f"lm{i}_{c}" for i in range(self.n_landmarks) for c in "xy")
        self.initial_mean = np.zeros(2)
        self.initial_std = np.ones(2)
        self.n_proposal_features = 2 + self.d_y

    def landmarks(self, theta: ParamVector) -> np.ndarray:
        return theta.model.reshape(self.n_landmarks, 2)

    # transitions: random walk, parameter-free

    def transition_drift(self, theta, x, t):
        return check_states(x, 2)

    def transition_log_std(self, theta):
        return np.full(2, np.log(self.motion_std))

    def score_transition(self, theta, x, x_next, t):
        return np.zeros((check_states(x, 2).shape[0], theta.size))

    def accumulate_drift_grad(self, theta, x, t, coeff, out):
        pass

    def accumulate_transition_logstd_grad(self, theta, coeff, out):
        pass

    # emissions

    def _geometry(self, theta, x):
        """Per-particle, per-landmark displacement, range, and bearing."""
        x = check_states(x, 2)
        lm = self.landmarks(theta)
        diff = lm[None, :, :] - x[:, None, :]          # (B, L, 2)
        rng = np.sqrt((diff * diff).sum(axis=2))       # (B, L)
        if np.any(rng < MIN_RANGE):
            raise LandmarkSingularityError("robot position coincides with a landmark")
        bearing = np.arctan2(diff[:, :, 1], diff[:, :, 0])
        return diff, rng, bearing

    def _residuals(self, theta, x, y):
        diff, rng, bearing = self._geometry(theta, x)
        obs = np.asarray(y, dtype=np.float64).reshape(self.n_landmarks, 2)
        res_range = rng - obs[:, 0]
        res_bearing = slam_angle_residual(bearing, obs[:, 1])
        return diff, rng, res_range, res_bearing

    def log_emission(self, theta, x_next, y):
        _, _, res_range, res_bearing = self._residuals(theta, x_next, y)
        quad = (res_range**2 + res_bearing**2).sum(axis=1)
        return -0.5 * quad / self.obs_std**2 - self.d_y * (0.5 * LOG_2PI + np.log(self.obs_std))

    def landmark_gradient(self, theta, x_next, y):
        """d log g / d landmarks, shape (B, L, 2)."""
        diff, rng, res_range, res_bearing = self._residuals(theta, x_next, y)
        inv_var = 1.0 / self.obs_std**2
        unit = diff / rng[:, :, None]
        # d bearing / d landmark = (-dy, dx) / range^2
        dbearing = np.stack([-diff[:, :, 1], diff[:, :, 0]], axis=2) / (rng**2)[:, :, None]
        return -inv_var * (res_range[:, :, None] * unit + res_bearing[:, :, None] * dbearing)

    def score_emission(self, theta, x_next, y):
        x_next = check_states(x_next, 2)
        out = np.zeros((x_next.shape[0], theta.size))
        out[:, : self.n_model] = self.landmark_gradient(theta, x_next, y).reshape(x_next.shape[0], -1)
        return out

    def grad_xnext_log_emission(self, theta, x_next, y):
        # displacement is landmark minus robot, so the robot gradient is the
        # negated sum of per-landmark gradients
        return -self.landmark_gradient(theta, x_next, y).sum(axis=1)

    def sample_emission(self, theta, x, t, rng):
        _, dist, bearing = self._geometry(theta, x)
        clean = np.stack([dist, bearing], axis=2).reshape(x.shape[0], self.d_y)
        return clean + self.obs_std * rng.standard_normal(clean.shape)


def landmark_score(model: SlamModel, theta: ParamVector, x, y) -> np.ndarray:
    """Gradient of the observation log-density over landmark coordinates."""
    x = check_states(x, 2)
    return model.landmark_gradient(theta, x, y).reshape(x.shape[0], -1)
