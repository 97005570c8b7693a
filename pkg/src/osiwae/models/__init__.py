"""Concrete experiment models and the bundle builder used by the harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod
from ..params import ParamVector
from ..ssm import BootstrapProposal, GaussianProposal, NeuralProposal, StateSpaceModel
from .growth import GrowthModel
from .lgssm import LinearGaussianModel, OptimalLgssmProposal
from .slam import SlamModel, landmark_score, slam_angle_residual, wrap_angle

__all__ = [
    "GrowthModel", "LinearGaussianModel", "OptimalLgssmProposal", "SlamModel",
    "ModelBundle", "build_model", "landmark_score", "slam_angle_residual", "wrap_angle",
]


@dataclass
class ModelBundle:
    """A model wired to a proposal with its parameter layout and truth."""

    kind: str
    model: StateSpaceModel
    proposal: GaussianProposal
    theta: ParamVector            # initial learner parameters
    theta_true: ParamVector       # full vector carrying the data-generating model block
    theta1_true_natural: np.ndarray  # truth in natural space, for error metrics


_LGSSM_KEYS = {"dx", "trans_std", "obs_std", "learn_model", "truth_seed", "init_coeff"}
_SLAM_KEYS = {"n_landmarks", "motion_std", "obs_std", "truth_seed", "init_spread"}
_GROWTH_KEYS = {"alpha0", "alpha1", "alpha2", "b", "trans_var", "obs_std",
                "alpha0_init", "b_init", "trans_var_init"}
_COMMON_KEYS = {"proposal", "hidden", "init_seed", "init_log_std"}


def build_model(kind: str, config: dict | None = None) -> ModelBundle:
    """Construct a model/proposal bundle from a flat config mapping.

    Unknown keys are hard errors; every model documents its own keys.
    """
    config = dict(config or {})
    if kind == "lgssm":
        allowed = _LGSSM_KEYS | _COMMON_KEYS
    elif kind == "slam":
        allowed = _SLAM_KEYS | _COMMON_KEYS
    elif kind == "growth":
        allowed = _GROWTH_KEYS | _COMMON_KEYS
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    unknown = set(config) - allowed
    if unknown:
        raise ValueError(f"unknown model config keys for {kind}: {sorted(unknown)}")

    proposal_kind = config.get("proposal", "neural")
    hidden = int(config.get("hidden", 64))
    init_seed = int(config.get("init_seed", 0))
    init_log_std = float(config.get("init_log_std", np.log(0.5)))

    if kind == "lgssm":
        d = int(config.get("dx", 10))
        truth_rng = rngmod.stream(int(config.get("truth_seed", 0)), role=rngmod.INIT)
        true_a = truth_rng.uniform(0.5, 1.0, size=d)
        true_b = truth_rng.uniform(0.5, 1.0, size=d)
        learn_model = bool(config.get("learn_model", True))
        model = LinearGaussianModel(
            d, config.get("trans_std", 0.2), config.get("obs_std", 0.5),
            learn_model=learn_model,
            fixed_coeff_a=None if learn_model else true_a,
            fixed_coeff_b=None if learn_model else true_b)
        init = np.full(2 * d, float(config.get("init_coeff", 0.2))) if learn_model else np.zeros(0)
        true_block = np.concatenate([true_a, true_b]) if learn_model else np.zeros(0)
        natural_true = np.concatenate([true_a, true_b])
    elif kind == "slam":
        n_lm = int(config.get("n_landmarks", 8))
        model = SlamModel(n_lm,
                          motion_std=float(config.get("motion_std", np.sqrt(0.2))),
                          obs_std=float(config.get("obs_std", np.sqrt(0.1))))
        truth_rng = rngmod.stream(int(config.get("truth_seed", 0)), role=rngmod.INIT)
        true_block = truth_rng.uniform(-8.0, 8.0, size=2 * n_lm)
        spread = float(config.get("init_spread", 2.0))
        init_rng = rngmod.stream(init_seed, role=rngmod.INIT, index=1)
        init = true_block + spread * init_rng.standard_normal(2 * n_lm)
        natural_true = true_block.copy()
    else:  # growth
        model = GrowthModel(alpha1=float(config.get("alpha1", 25.0)),
                            alpha2=float(config.get("alpha2", 8.0)),
                            obs_std=float(config.get("obs_std", 1.0)))
        true_block = np.array([float(config.get("alpha0", 0.5)),
                               float(config.get("b", 0.05)),
                               0.5 * np.log(float(config.get("trans_var", 10.0)))])
        init = np.array([float(config.get("alpha0_init", 0.2)),
                         float(config.get("b_init", 0.1)),
                         0.5 * np.log(float(config.get("trans_var_init", 20.0)))])
        natural_true = model.theta1_natural(true_block)

    if proposal_kind == "neural":
        proposal = NeuralProposal(model, hidden=(hidden,), init_log_std=init_log_std)
    elif proposal_kind == "bootstrap":
        proposal = BootstrapProposal(model)
    elif proposal_kind == "optimal":
        if kind != "lgssm":
            raise ValueError("the exact optimal proposal is only available for lgssm")
        proposal = OptimalLgssmProposal(model)
    else:
        raise ValueError(f"unknown proposal kind {proposal_kind!r}")

    prop_init = proposal.init_params(rngmod.stream(init_seed, role=rngmod.INIT, index=2))
    theta = ParamVector(np.concatenate([init, prop_init]), n_model=init.size)
    theta_true = ParamVector(np.concatenate([true_block, prop_init]), n_model=true_block.size) \
        if true_block.size else theta.copy()
    return ModelBundle(kind=kind, model=model, proposal=proposal, theta=theta,
                       theta_true=theta_true, theta1_true_natural=natural_true)
