"""Online propagation of per-particle complete-data score statistics.

Each particle carries a statistic vector tau approximating the conditional
expectation of the accumulated score given the particle's current position.
The cheap forward update pushes tau along the ancestor line; at scheduled
steps a backward-kernel draw is averaged in (one fresh draw paired with the
ancestor draw), which keeps the statistic variance from growing
quadratically with time.  Backward sampling only happens on steps that also
resampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtering import DegenerateCloudError, ParticleCloud, categorical, ess, mutate_and_reweight, normalize
from .params import ParamVector
from .ssm import GaussianProposal, StateSpaceModel

_BACKWARD_CHUNK = 512


@dataclass(frozen=True)
class Rule:
    """When an operation fires: always, never, ess:c (ESS < c*N), every:k."""

    kind: str
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("always", "never", "ess_threshold", "every_k"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == "ess_threshold" and not (self.value is not None and 0.0 < self.value <= 1.0):
            raise ValueError("ess threshold must lie in (0, 1]")
        if self.kind == "every_k" and not (self.value is not None and int(self.value) >= 1):
            raise ValueError("every_k requires k >= 1")

    def fires(self, t: int, log_weights: np.ndarray) -> bool:
        if self.kind == "always":
            return True
        if self.kind == "never":
            return False
        if self.kind == "every_k":
            return t % int(self.value) == 0
        return ess(log_weights) < self.value * log_weights.size

    @staticmethod
    def parse(text: str) -> "Rule":
        text = str(text).strip()
        if text in ("always", "never"):
            return Rule(text)
        if text.startswith("ess:"):
            return Rule("ess_threshold", float(text[4:]))
        if text.startswith("every:"):
            return Rule("every_k", int(text[6:]))
        raise ValueError(f"cannot parse schedule rule {text!r}")

    def spec(self) -> str:
        if self.kind == "always" or self.kind == "never":
            return self.kind
        if self.kind == "ess_threshold":
            return f"ess:{self.value}"
        return f"every:{int(self.value)}"


@dataclass(frozen=True)
class SmoothingSchedule:
    resample: Rule
    backward: Rule

    @staticmethod
    def default() -> "SmoothingSchedule":
        return SmoothingSchedule(resample=Rule("ess_threshold", 0.5),
                                 backward=Rule("every_k", 5))


def backward_probabilities(cloud: ParticleCloud, model: StateSpaceModel, theta: ParamVector,
                           x_next: np.ndarray, t_next: int) -> np.ndarray:
    """Backward-kernel probabilities over the cloud for one new state."""
    x_next = np.asarray(x_next, dtype=np.float64).reshape(1, model.d_x)
    log_mass = cloud.log_weights + model.log_transition_pairwise(theta, cloud.particles, x_next, t_next)[0]
    if not np.any(np.isfinite(log_mass)):
        raise DegenerateCloudError("backward kernel has no mass on the cloud")
    return normalize(log_mass)


def _backward_draws(cloud: ParticleCloud, model: StateSpaceModel, theta: ParamVector,
                    x_next: np.ndarray, t_next: int, uniforms: np.ndarray) -> np.ndarray:
    """One backward-kernel index draw per new particle, chunked over rows."""
    k = x_next.shape[0]
    out = np.empty(k, dtype=np.int64)
    for start in range(0, k, _BACKWARD_CHUNK):
        rows = slice(start, min(start + _BACKWARD_CHUNK, k))
        log_mass = model.log_transition_pairwise(theta, cloud.particles, x_next[rows], t_next)
        log_mass += cloud.log_weights[None, :]
        peak = log_mass.max(axis=1, keepdims=True)
        if not np.all(np.isfinite(peak)):
            raise DegenerateCloudError("backward kernel has no mass on the cloud")
        mass = np.exp(log_mass - peak)
        cdf = np.cumsum(mass, axis=1)
        targets = uniforms[rows] * cdf[:, -1]
        out[rows] = np.minimum((cdf < targets[:, None]).sum(axis=1), cloud.n - 1)
    return out


def adasmooth_step(cloud: ParticleCloud, model: StateSpaceModel, proposal: GaussianProposal,
                   theta: ParamVector, y: np.ndarray, t_next: int,
                   schedule: SmoothingSchedule, rng: np.random.Generator) -> ParticleCloud:
    """Advance particles, weights, and score statistics by one observation.

    Draw order on the stream is fixed: ancestor uniforms (when resampling),
    proposal noise, then backward uniforms (when backward-sampling fires).
    """
    rho_res = schedule.resample.fires(t_next, cloud.log_weights)
    ancestors, x_next, log_w, _ = mutate_and_reweight(
        cloud, model, proposal, theta, y, t_next, rho_res, rng)
    inc_emission = model.score_emission(theta, x_next, y)
    inc_transition = model.score_transition(theta, cloud.particles[ancestors], x_next, t_next)
    forward = cloud.statistics[ancestors] + inc_transition

    if rho_res and schedule.backward.fires(t_next, cloud.log_weights):
        draws = _backward_draws(cloud, model, theta, x_next, t_next, rng.random(cloud.n))
        inc_backward = model.score_transition(theta, cloud.particles[draws], x_next, t_next)
        tau = 0.5 * (forward + cloud.statistics[draws] + inc_backward) + inc_emission
    else:
        tau = forward + inc_emission
    return ParticleCloud(particles=x_next, log_weights=log_w, statistics=tau, step=cloud.step + 1)


def smoothed_expectation(cloud: ParticleCloud) -> np.ndarray:
    """Weighted mean of the statistic vectors: the smoothed score estimate."""
    return cloud.probabilities() @ cloud.statistics
