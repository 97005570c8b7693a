"""Online learners: the importance-weighted gradient, its score-free
variant, recursive maximum likelihood, and the two-pass update loop.

The central estimator draws M-1 "check" samples and N "hat" samples from
the weighted cloud (each completed with fresh proposal noise) and averages,
over the hat samples, the ratio of summed weight gradients to summed
weights plus a multi-sample log-weight term multiplied by the centered
particle statistics.  Dropping that second term for every block gives the
score-free baseline gradient; the model-block part of the estimator
approaches the recursive-maximum-likelihood direction as M grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .filtering import ParticleCloud, categorical, init_cloud
from .params import (ALL_BLOCKS, MODEL_BLOCK, PROPOSAL_BLOCK, GradientEstimate,
                     ParamVector, restrict_to_blocks)
from .smoothing import SmoothingSchedule, adasmooth_step, smoothed_expectation
from .ssm import GaussianProposal, StateSpaceModel, grad_log_weight

LEARNER_KINDS = ("osiwae", "ovsmc", "rml")


def osiwae_gradient(cloud: ParticleCloud, model: StateSpaceModel, proposal: GaussianProposal,
                    theta: ParamVector, y: np.ndarray, t_next: int, m_samples: int,
                    rng: np.random.Generator, blocks=ALL_BLOCKS,
                    include_score_term: bool = True) -> GradientEstimate:
    """Multi-sample stochastic gradient of the streaming variational bound.

    m_samples is the importance-sample count M; M-1 check draws are shared
    across all N hat draws.  With include_score_term=False the centered
    statistic term is dropped for all blocks.
    """
    if m_samples < 1:
        raise ValueError("need at least one importance sample")
    probs = cloud.probabilities()
    n, d_x = cloud.n, model.d_x

    idx_check = categorical(probs, rng.random(m_samples - 1))
    u_check = rng.standard_normal((m_samples - 1, d_x))
    idx_hat = categorical(probs, rng.random(n))
    u_hat = rng.standard_normal((n, d_x))

    x_all = cloud.particles[np.concatenate([idx_check, idx_hat])]
    u_all = np.concatenate([u_check, u_hat], axis=0)
    _, lw, glw = grad_log_weight(model, proposal, theta, x_all, y, t_next, u_all, blocks=blocks)

    m_minus = m_samples - 1
    lw_check, lw_hat = lw[:m_minus], lw[m_minus:]
    glw_check, glw_hat = glw[:m_minus], glw[m_minus:]

    # per-hat log of (w_hat_j + sum of check weights), stable for any spread
    if m_minus:
        peak = lw_check.max()
        check_soft = np.exp(lw_check - peak)
        lse_check = peak + np.log(check_soft.sum())
        check_grad_sum = (check_soft / check_soft.sum()) @ glw_check
    else:
        lse_check = -np.inf
        check_grad_sum = np.zeros(theta.size)
    log_denom = np.logaddexp(lw_hat, lse_check)

    # mean over hats of (w_j * grad_j + sum_checks_grad) / (w_j + sum_checks):
    # a_j weights the hat's own gradient, b_j the normalized check aggregate
    a = np.exp(lw_hat - log_denom)
    b = np.exp(lse_check - log_denom)
    values = a @ glw_hat / n + b.mean() * check_grad_sum

    if include_score_term and MODEL_BLOCK in blocks:
        # statistics are zero on the proposal block, so the centered-statistic
        # term can only ever touch model coordinates
        gamma2 = m_samples * (log_denom - np.log(m_samples))
        tau_hat = cloud.statistics[idx_hat]
        values += gamma2 @ (tau_hat - tau_hat.mean(axis=0)) / n

    return GradientEstimate(restrict_to_blocks(values, theta, blocks), frozenset(blocks))


def ovsmc_gradient(cloud, model, proposal, theta, y, t_next, m_samples, rng,
                   blocks=ALL_BLOCKS) -> GradientEstimate:
    """Score-free variant: identical draws, centered-statistic term dropped."""
    return osiwae_gradient(cloud, model, proposal, theta, y, t_next, m_samples, rng,
                           blocks=blocks, include_score_term=False)


def rml_gradient(cloud_prev: ParticleCloud, cloud_next: ParticleCloud,
                 theta: ParamVector) -> GradientEstimate:
    """Increment of the smoothed score between consecutive clouds.

    By the telescoping of the accumulated score this estimates the gradient
    of the newest predictive log-likelihood increment; it never involves the
    proposal block.
    """
    if cloud_next.step != cloud_prev.step + 1:
        raise ValueError("clouds must be consecutive steps of the same run")
    diff = smoothed_expectation(cloud_next) - smoothed_expectation(cloud_prev)
    return GradientEstimate(restrict_to_blocks(diff, theta, (MODEL_BLOCK,)),
                            frozenset((MODEL_BLOCK,)))


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter block."""

    m: np.ndarray
    v: np.ndarray
    count: int
    rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, rate: float) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), count=0, rate=rate)


def adam_step(state: AdamState, grad: GradientEstimate, theta: ParamVector) -> ParamVector:
    """Ascent step along the bias-corrected moment direction.

    Mutates state; returns the updated parameter vector.  Coordinates
    outside the gradient's covered blocks keep zero moments and are left
    exactly unchanged.
    """
    grad.check_discipline(theta)
    g = grad.values
    state.count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1**state.count)
    v_hat = state.v / (1.0 - state.beta2**state.count)
    step = state.rate * m_hat / (np.sqrt(v_hat) + state.eps)
    step = restrict_to_blocks(step, theta, grad.blocks_covered)
    return ParamVector(theta.values + step, theta.n_model)


@dataclass
class LearnerConfig:
    """Sample sizes, schedules, and optimizer settings for one run."""

    n_particles: int
    m_large: int
    m_small: int = 5
    schedule: SmoothingSchedule = field(default_factory=SmoothingSchedule.default)
    rate_model: float = 1e-3
    rate_proposal: float = 1e-3
    clip_norm: float | None = 1e3

    def __post_init__(self):
        if self.n_particles < 2 or self.m_large < 2 or self.m_small < 1:
            raise ValueError("need N >= 2, M >= 2, M_small >= 1")


def clip_gradient(grad: GradientEstimate, max_norm: float | None) -> GradientEstimate:
    """Scale down to the given Euclidean norm; guards early blowups."""
    if max_norm is None:
        return grad
    norm = float(np.linalg.norm(grad.values))
    if norm <= max_norm or norm == 0.0:
        return grad
    return GradientEstimate(grad.values * (max_norm / norm), grad.blocks_covered)


def smc_osiwae_iteration(cloud, theta, adam_model, adam_proposal, model, proposal,
                         y, t_next, config: LearnerConfig, rng_proposal_pass,
                         rng_model_pass, rng_smooth, include_score_term=True):
    """One full update: proposal pass (small M), model pass (large M), then
    statistic propagation with the updated parameters.

    Passes for an empty block are skipped.  Returns (cloud', theta').
    """
    if theta.n_proposal > 0:
        g2 = osiwae_gradient(cloud, model, proposal, theta, y, t_next, config.m_small,
                             rng_proposal_pass, blocks=(PROPOSAL_BLOCK,),
                             include_score_term=include_score_term)
        theta = adam_step(adam_proposal, clip_gradient(g2, config.clip_norm), theta)
    if theta.n_model > 0:
        g1 = osiwae_gradient(cloud, model, proposal, theta, y, t_next, config.m_large,
                             rng_model_pass, blocks=(MODEL_BLOCK,),
                             include_score_term=include_score_term)
        theta = adam_step(adam_model, clip_gradient(g1, config.clip_norm), theta)
    cloud = adasmooth_step(cloud, model, proposal, theta, y, t_next, config.schedule, rng_smooth)
    return cloud, theta


class Learner:
    """Streaming state for one run: parameters, optimizer moments, cloud.

    Every random draw comes from a counter-based stream keyed by the step
    index and a role, so a run is a pure function of (inputs, seed) and can
    be resumed bit-exactly from any step.
    """

    def __init__(self, model: StateSpaceModel, proposal: GaussianProposal,
                 theta: ParamVector, config: LearnerConfig, kind: str, seed: int):
        if kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {kind!r}")
        if kind == "rml" and theta.n_model == 0:
            raise ValueError("rml has nothing to learn on a proposal-only parameterization")
        self.model = model
        self.proposal = proposal
        self.config = config
        self.kind = kind
        self.rng = rngmod.RunRng(seed)
        self.theta = theta.copy()
        self.adam_model = AdamState.zeros(theta.size, config.rate_model)
        self.adam_proposal = AdamState.zeros(theta.size, config.rate_proposal)
        self.prev_smoothed = np.zeros(theta.size)
        self.cloud: ParticleCloud | None = None

    @property
    def step(self) -> int:
        return -1 if self.cloud is None else self.cloud.step

    def start(self, y0: np.ndarray) -> None:
        self.cloud = init_cloud(self.model, self.theta, y0, self.config.n_particles,
                                self.rng.stream(0, rngmod.INIT))

    def advance(self, y: np.ndarray) -> None:
        """Consume the next observation: update theta, then propagate."""
        if self.cloud is None:
            raise RuntimeError("call start() with the first observation before advancing")
        t_next = self.cloud.step + 1
        if self.kind in ("osiwae", "ovsmc"):
            self.cloud, self.theta = smc_osiwae_iteration(
                self.cloud, self.theta, self.adam_model, self.adam_proposal,
                self.model, self.proposal, y, t_next, self.config,
                self.rng.stream(t_next, rngmod.GRAD_PROPOSAL),
                self.rng.stream(t_next, rngmod.GRAD_MODEL),
                self.rng.stream(t_next, rngmod.SMOOTH),
                include_score_term=self.kind == "osiwae")
        else:
            smoothed = smoothed_expectation(self.cloud)
            grad = GradientEstimate(
                restrict_to_blocks(smoothed - self.prev_smoothed, self.theta, (MODEL_BLOCK,)),
                frozenset((MODEL_BLOCK,)))
            self.theta = adam_step(self.adam_model, clip_gradient(grad, self.config.clip_norm),
                                   self.theta)
            self.prev_smoothed = smoothed
            self.cloud = adasmooth_step(self.cloud, self.model, self.proposal, self.theta,
                                        y, t_next, self.config.schedule,
                                        self.rng.stream(t_next, rngmod.SMOOTH))
