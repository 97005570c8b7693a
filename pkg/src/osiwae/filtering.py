"""Weighted particle clouds and the mutation/reweight step.

Weights are carried in the log domain; linear-domain weights only ever
appear inside normalized sums computed through log-sum-exp.  Resampling is
multinomial (i.i.d. categorical draws) so that the distributional
assumptions of the smoothing statistics hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParamVector
from .ssm import GaussianProposal, StateSpaceModel, log_weight


class DegenerateCloudError(RuntimeError):
    """All particles carry zero weight; the proposal has lost the support."""


@dataclass
class ParticleCloud:
    """N particles with log weights and per-particle statistic vectors."""

    particles: np.ndarray    # (N, d_x)
    log_weights: np.ndarray  # (N,)
    statistics: np.ndarray   # (N, p)
    step: int

    def __post_init__(self):
        n = self.particles.shape[0]
        if n < 2:
            raise ValueError("a cloud needs at least two particles")
        if self.log_weights.shape != (n,) or self.statistics.shape[0] != n:
            raise ValueError("cloud arrays disagree on particle count")
        if not np.any(np.isfinite(self.log_weights)):
            raise DegenerateCloudError(f"all log weights are -inf at step {self.step}")

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    def probabilities(self) -> np.ndarray:
        return normalize(self.log_weights)

    def ess(self) -> float:
        return ess(self.log_weights)


def normalize(log_weights: np.ndarray) -> np.ndarray:
    """Self-normalized probabilities from log weights via log-sum-exp."""
    log_weights = np.asarray(log_weights, dtype=np.float64)
    m = np.max(log_weights)
    if not np.isfinite(m):
        raise DegenerateCloudError("cannot normalize: no finite log weight")
    w = np.exp(log_weights - m)
    return w / w.sum()


def ess(log_weights: np.ndarray) -> float:
    """Effective sample size 1 / sum(p_i^2), in [1, N]."""
    p = normalize(log_weights)
    return float(1.0 / np.sum(p * p))


def categorical(probabilities: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF categorical draws; uniforms in [0, 1)."""
    cdf = np.cumsum(probabilities)
    idx = np.searchsorted(cdf, uniforms, side="right")
    return np.minimum(idx, probabilities.size - 1)


def multinomial_resample(cloud: ParticleCloud, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """count i.i.d. ancestor indices drawn proportionally to the weights."""
    count = cloud.n if count is None else int(count)
    return categorical(cloud.probabilities(), rng.random(count))


def mutate_and_reweight(cloud: ParticleCloud, model: StateSpaceModel, proposal: GaussianProposal,
                        theta: ParamVector, y: np.ndarray, t_next: int, resampled: bool,
                        rng: np.random.Generator):
    """One particle-filter step: optional selection, mutation, reweighting.

    Returns (ancestors, new_particles, new_log_weights, noise) where noise is
    the auxiliary standard-normal draw used by the reparameterized proposal.
    When resampling is off the ancestors are the identity and the previous
    log weight carries over additively.
    """
    if resampled:
        ancestors = multinomial_resample(cloud, rng)
    else:
        ancestors = np.arange(cloud.n)
    u = rng.standard_normal((cloud.n, model.d_x))
    x_prev = cloud.particles[ancestors]
    x_next, lw_inc = log_weight(model, proposal, theta, x_prev, y, t_next, u)
    new_logw = lw_inc if resampled else cloud.log_weights + lw_inc
    return ancestors, x_next, new_logw, u


def init_cloud(model: StateSpaceModel, theta: ParamVector, y0: np.ndarray, n: int,
               rng: np.random.Generator) -> ParticleCloud:
    """Time-zero cloud: sample the initial law, weight by the emission.

    Statistics start at the emission score, the time-zero value of the
    accumulated complete-data score.
    """
    particles = model.sample_initial(n, rng)
    log_w = model.log_emission(theta, particles, y0)
    stats = model.score_emission(theta, particles, y0)
    return ParticleCloud(particles=particles, log_weights=log_w, statistics=stats, step=0)
