"""State-space model and proposal abstractions plus the weight machinery.

A model provides log transition/emission densities, their parameter scores
(written into the model block of a flat theta), and the state gradients the
pathwise chain rule needs.  A proposal is Gaussian with mean and diagonal
scale functions of (previous state, observation, time); proposing is the
affine reparameterization x' = mu + sigma * u with u standard normal.

Everything is batched over particles: states are (B, d_x) arrays, densities
return (B,), scores return (B, p) with p the full parameter dimension.  All
densities are handled in the log domain.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .params import ALL_BLOCKS, MODEL_BLOCK, PROPOSAL_BLOCK, ParamVector

LOG_2PI = np.log(2.0 * np.pi)


class SupportError(ValueError):
    """Raised when a density that must be positive evaluates to zero."""


class StateSpaceModel(ABC):
    """Markovian latent dynamics with conditionally independent observations.

    Transitions are Gaussian with a drift function and a diagonal scale,
    which covers every model in this package; emissions are model-specific.
    The initial state law is parameter-free.
    """

    d_x: int
    d_y: int
    n_model: int
    theta1_names: tuple
    initial_mean: np.ndarray
    initial_std: np.ndarray
    # number of conditioning features the neural proposal receives
    n_proposal_features: int
    # whether those features depend on the model block (chain rule needed)
    features_depend_on_model: bool = False

    # -- transitions -------------------------------------------------------

    @abstractmethod
    def transition_drift(self, theta: ParamVector, x: np.ndarray, t: int) -> np.ndarray:
        """Mean of x_t given x_{t-1}=x; shape (B, d_x)."""

    @abstractmethod
    def transition_log_std(self, theta: ParamVector) -> np.ndarray:
        """Log of the diagonal transition scale; shape (d_x,)."""

    def log_transition(self, theta: ParamVector, x: np.ndarray, x_next: np.ndarray, t: int) -> np.ndarray:
        x = check_states(x, self.d_x)
        x_next = check_states(x_next, self.d_x)
        drift = self.transition_drift(theta, x, t)
        log_std = self.transition_log_std(theta)
        z = (x_next - drift) / np.exp(log_std)
        return -0.5 * (z * z).sum(axis=1) - log_std.sum() - 0.5 * self.d_x * LOG_2PI

    def log_transition_pairwise(self, theta: ParamVector, x_from: np.ndarray, x_to: np.ndarray, t: int) -> np.ndarray:
        """log m(x_to[k] | x_from[n]) for all pairs; shape (K, N)."""
        drift = self.transition_drift(theta, check_states(x_from, self.d_x), t)
        log_std = self.transition_log_std(theta)
        inv_var = np.exp(-2.0 * log_std)
        diff = x_to[:, None, :] - drift[None, :, :]
        quad = np.einsum("knd,d->kn", diff * diff, inv_var)
        return -0.5 * quad - log_std.sum() - 0.5 * self.d_x * LOG_2PI

    def grad_xnext_log_transition(self, theta: ParamVector, x: np.ndarray, x_next: np.ndarray, t: int) -> np.ndarray:
        drift = self.transition_drift(theta, x, t)
        return -(x_next - drift) * np.exp(-2.0 * self.transition_log_std(theta))

    @abstractmethod
    def score_transition(self, theta: ParamVector, x: np.ndarray, x_next: np.ndarray, t: int) -> np.ndarray:
        """d log m / d theta, zero outside the model block; shape (B, p)."""

    @abstractmethod
    def accumulate_drift_grad(self, theta: ParamVector, x: np.ndarray, t: int,
                              coeff: np.ndarray, out: np.ndarray) -> None:
        """out += coeff . d(drift)/d(theta); coeff is (B, d_x), out (B, p)."""

    @abstractmethod
    def accumulate_transition_logstd_grad(self, theta: ParamVector, coeff: np.ndarray,
                                          out: np.ndarray) -> None:
        """out += coeff . d(log transition std)/d(theta)."""

    # -- emissions ---------------------------------------------------------

    @abstractmethod
    def log_emission(self, theta: ParamVector, x_next: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def score_emission(self, theta: ParamVector, x_next: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d log g / d theta, zero outside the model block; shape (B, p)."""

    @abstractmethod
    def grad_xnext_log_emission(self, theta: ParamVector, x_next: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    # -- proposal conditioning --------------------------------------------

    def proposal_features(self, theta: ParamVector, x: np.ndarray, y: np.ndarray, t: int) -> np.ndarray:
        """Conditioning vector fed to neural proposal heads; default (x, y)."""
        return np.concatenate([x, np.broadcast_to(y, (x.shape[0], self.d_y))], axis=1)

    def accumulate_feature_grad(self, theta: ParamVector, x: np.ndarray, y: np.ndarray, t: int,
                                coeff: np.ndarray, out: np.ndarray) -> None:
        """Chain feature gradients into the model block; default no-op."""

    # -- initial law and simulation ----------------------------------------

    def sample_initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.initial_mean + self.initial_std * rng.standard_normal((n, self.d_x))

    def sample_transition(self, theta: ParamVector, x: np.ndarray, t: int,
                          rng: np.random.Generator) -> np.ndarray:
        drift = self.transition_drift(theta, x, t)
        return drift + np.exp(self.transition_log_std(theta)) * rng.standard_normal(x.shape)

    @abstractmethod
    def sample_emission(self, theta: ParamVector, x: np.ndarray, t: int,
                        rng: np.random.Generator) -> np.ndarray:
        ...

    # -- reporting ----------------------------------------------------------

    def theta1_natural(self, theta1: np.ndarray) -> np.ndarray:
        """Model block mapped back to natural parameter space."""
        return np.asarray(theta1, dtype=np.float64).copy()


class GaussianProposal(ABC):
    """Gaussian recognition kernel r(x' | x, y) with diagonal scale."""

    n_proposal: int  # number of proposal-block parameters owned

    @abstractmethod
    def mean_std(self, theta: ParamVector, x: np.ndarray, y: np.ndarray, t: int):
        """Return (mean (B, d_x), std (B, d_x), cache for accumulate_grad)."""

    @abstractmethod
    def accumulate_grad(self, theta: ParamVector, x: np.ndarray, y: np.ndarray, t: int, cache,
                        coeff_mean: np.ndarray, coeff_logstd: np.ndarray,
                        out: np.ndarray, blocks=ALL_BLOCKS) -> None:
        """out += coeff_mean . d(mean)/d(theta) + coeff_logstd . d(log std)/d(theta)."""

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(0)


class BootstrapProposal(GaussianProposal):
    """Propose from the transition density itself; weights reduce to g."""

    n_proposal = 0

    def __init__(self, model: StateSpaceModel):
        self.model = model

    def mean_std(self, theta, x, y, t):
        mean = self.model.transition_drift(theta, x, t)
        std = np.broadcast_to(np.exp(self.model.transition_log_std(theta)), mean.shape)
        return mean, std, None

    def accumulate_grad(self, theta, x, y, t, cache, coeff_mean, coeff_logstd, out, blocks=ALL_BLOCKS):
        if MODEL_BLOCK in blocks:
            self.model.accumulate_drift_grad(theta, x, t, coeff_mean, out)
            self.model.accumulate_transition_logstd_grad(theta, coeff_logstd, out)


class NeuralProposal(GaussianProposal):
    """Mean and diagonal log-std given by two distinct feed-forward nets."""

    def __init__(self, model: StateSpaceModel, hidden=(64,), init_log_std: float = np.log(0.5)):
        from .nets import GaussianProposalHead

        self.model = model
        self.head = GaussianProposalHead(model.n_proposal_features, model.d_x,
                                         hidden=hidden, init_log_std=init_log_std)
        self.n_proposal = self.head.n_params
        self.hidden = tuple(hidden)

    def init_params(self, rng):
        return self.head.init_params(rng)

    def mean_std(self, theta, x, y, t):
        feats = self.model.proposal_features(theta, x, y, t)
        mean, log_std, tapes = self.head.forward(theta.proposal, feats)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise FloatingPointError("proposal network produced non-finite output")
        return mean, np.exp(log_std), tapes

    def accumulate_grad(self, theta, x, y, t, cache, coeff_mean, coeff_logstd, out, blocks=ALL_BLOCKS):
        want_model = MODEL_BLOCK in blocks and self.model.features_depend_on_model
        want_prop = PROPOSAL_BLOCK in blocks
        if not (want_model or want_prop):
            return
        param_grads, input_grads = self.head.backward(cache, coeff_mean, coeff_logstd)
        if want_prop:
            out[:, theta.n_model:] += param_grads
        if want_model:
            self.model.accumulate_feature_grad(theta, x, y, t, input_grads, out)


# ---------------------------------------------------------------------------
# reparameterized weights


def propose(model: StateSpaceModel, proposal: GaussianProposal, theta: ParamVector,
            x: np.ndarray, y: np.ndarray, t: int, u: np.ndarray) -> np.ndarray:
    """x' = mean + std * u for the proposal's Gaussian at (x, y, t)."""
    x = check_states(x, model.d_x)
    u = check_states(u, model.d_x)
    mean, std, _ = proposal.mean_std(theta, x, y, t)
    return mean + std * u


def log_weight(model, proposal, theta, x, y, t, u):
    """Importance weight of the proposal move, in the log domain.

    Returns (x_next, log_w) where log_w = log g + log m - log r, all three
    evaluated at x_next = mean + std * u.
    """
    x_next, lw, _ = _weight_core(model, proposal, theta, x, y, t, u, want_grad=False)
    return x_next, lw


def grad_log_weight(model, proposal, theta, x, y, t, u, blocks=ALL_BLOCKS):
    """Full parameter gradient of log_weight, including the pathwise term.

    Returns (x_next, log_w (B,), grad (B, p)); entries of blocks not
    requested are zero.
    """
    return _weight_core(model, proposal, theta, x, y, t, u, want_grad=True, blocks=blocks)


def _weight_core(model, proposal, theta, x, y, t, u, want_grad, blocks=ALL_BLOCKS):
    x = check_states(x, model.d_x)
    u = check_states(u, model.d_x)
    mean, std, cache = proposal.mean_std(theta, x, y, t)
    x_next = mean + std * u
    if not np.all(np.isfinite(x_next)):
        raise FloatingPointError("non-finite proposal output")
    if np.any(std <= 0.0):
        raise SupportError("proposal scale must be positive")
    log_r = -0.5 * (u * u).sum(axis=1) - np.log(std).sum(axis=1) - 0.5 * model.d_x * LOG_2PI
    log_m = model.log_transition(theta, x, x_next, t)
    log_g = model.log_emission(theta, x_next, y)
    lw = log_m + log_g - log_r
    if not want_grad:
        return x_next, lw, None

    grad = np.zeros((x.shape[0], theta.size))
    if MODEL_BLOCK in blocks:
        grad += model.score_transition(theta, x, x_next, t)
        grad += model.score_emission(theta, x_next, y)
    g_state = (model.grad_xnext_log_transition(theta, x, x_next, t)
               + model.grad_xnext_log_emission(theta, x_next, y))
    # d(log w)/d(mean_k) = g_state_k,  d(log w)/d(log std_k) = u_k*std_k*g_state_k + 1;
    # the +1 is the entropy of the proposal at the reparameterized point.
    coeff_mean = g_state
    coeff_logstd = u * std * g_state + 1.0
    proposal.accumulate_grad(theta, x, y, t, cache, coeff_mean, coeff_logstd, grad, blocks=blocks)
    return x_next, lw, grad


def check_states(arr: np.ndarray, d: int) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"state array has shape {arr.shape}, expected (B, {d})")
    return arr
