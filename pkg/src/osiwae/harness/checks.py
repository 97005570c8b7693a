"""Measurement drivers behind the acceptance suite and the `check` command.

Each function runs one quantitative experiment (gradient agreement, Monte
Carlo rates, desk-scale replicas of the headline figures) and returns the
measured numbers; callers decide pass/fail against their tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod
from ..filtering import ParticleCloud, ess, init_cloud, mutate_and_reweight, normalize
from ..learning import Learner, LearnerConfig, osiwae_gradient
from ..models import build_model
from ..models.lgssm import LinearGaussianModel, OptimalLgssmProposal
from ..nets import Mlp
from ..oracle import (GaussianBelief, KalmanParams, exact_likfunc_lgssm, kalman_filter,
                      kalman_score, mc_colbo)
from ..params import ParamVector
from ..smoothing import Rule, SmoothingSchedule, adasmooth_step, smoothed_expectation
from ..ssm import BootstrapProposal, grad_log_weight, log_weight


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


# ---------------------------------------------------------------------------
# gradient agreement


def max_fd_error_weight_gradient(kind: str, config: dict, n_points: int, seed: int = 0,
                                 step: float = 1e-5) -> float:
    """Worst relative disagreement between the analytic weight gradient and
    central finite differences over randomized (theta, x, y, u)."""
    bundle = build_model(kind, config)
    model, proposal = bundle.model, bundle.proposal
    gen = rngmod.stream(seed, role=rngmod.ORACLE)
    theta0 = bundle.theta
    worst = 0.0
    for _ in range(n_points):
        values = theta0.values + 0.1 * gen.standard_normal(theta0.size)
        theta = ParamVector(values, theta0.n_model)
        x = model.sample_initial(1, gen)
        x_for_y = model.sample_initial(1, gen)
        t = int(gen.integers(1, 7))
        y = model.sample_emission(bundle.theta_true, x_for_y, t, gen)[0]
        u = gen.standard_normal((1, model.d_x))
        _, _, grad = grad_log_weight(model, proposal, theta, x, y, t, u)
        fd = np.empty(theta.size)
        for k in range(theta.size):
            bumped = theta.values.copy()
            bumped[k] += step
            _, hi = log_weight(model, proposal, ParamVector(bumped, theta.n_model), x, y, t, u)
            bumped[k] = theta.values[k] - step
            _, lo = log_weight(model, proposal, ParamVector(bumped, theta.n_model), x, y, t, u)
            fd[k] = (hi[0] - lo[0]) / (2.0 * step)
        scale = np.maximum(np.abs(fd), 1.0)
        worst = max(worst, float(np.max(np.abs(grad[0] - fd) / scale)))
    return worst


def max_fd_error_landmark_score(n_points: int, seed: int = 0, step: float = 1e-5) -> float:
    """Landmark-block emission score against wrap-aware finite differences."""
    bundle = build_model("slam", {"n_landmarks": 3})
    model = bundle.model
    gen = rngmod.stream(seed, role=rngmod.ORACLE)
    worst = 0.0
    count = 0
    while count < n_points:
        theta = ParamVector(bundle.theta.values + gen.standard_normal(bundle.theta.size),
                            bundle.theta.n_model)
        x = 4.0 * gen.standard_normal((1, 2))
        y = model.sample_emission(theta, x, 0, gen)[0]
        # keep away from the branch cut so the finite difference is smooth
        _, _, res_r, res_b = model._residuals(theta, x, y)
        if np.any(np.abs(res_b) > 3.0):
            continue
        count += 1
        analytic = model.score_emission(theta, x, y)[0, : model.n_model]
        fd = np.empty(model.n_model)
        for k in range(model.n_model):
            bumped = theta.values.copy()
            bumped[k] += step
            hi = model.log_emission(ParamVector(bumped, theta.n_model), x, y)[0]
            bumped[k] = theta.values[k] - step
            lo = model.log_emission(ParamVector(bumped, theta.n_model), x, y)[0]
            fd[k] = (hi - lo) / (2.0 * step)
        scale = np.maximum(np.abs(fd), 1.0)
        worst = max(worst, float(np.max(np.abs(analytic - fd) / scale)))
    return worst


def max_fd_error_mlp(n_nets: int, seed: int = 0, step: float = 1e-5) -> float:
    """Backpropagated gradients against finite differences on random nets."""
    gen = rngmod.stream(seed, role=rngmod.ORACLE)
    worst = 0.0
    for _ in range(n_nets):
        sizes = [int(gen.integers(1, 5)) for _ in range(int(gen.integers(2, 5)))]
        net = Mlp(sizes)
        params = net.init_params(gen) + 0.3 * gen.standard_normal(net.n_params)
        x = gen.standard_normal((1, net.n_in))
        upstream = gen.standard_normal((1, net.n_out))
        out, tape = net.forward(params, x)
        pg, ig = net.backward(params, tape, upstream)

        def objective(p, xx):
            val, _ = net.forward(p, xx)
            return float(upstream[0] @ val[0])

        fd_p = np.empty(net.n_params)
        for k in range(net.n_params):
            bumped = params.copy()
            bumped[k] += step
            hi = objective(bumped, x)
            bumped[k] = params[k] - step
            fd_p[k] = (hi - objective(bumped, x)) / (2.0 * step)
        fd_x = np.empty(net.n_in)
        for k in range(net.n_in):
            bumped = x.copy()
            bumped[0, k] += step
            hi = objective(params, bumped)
            bumped[0, k] = x[0, k] - step
            fd_x[k] = (hi - objective(params, bumped)) / (2.0 * step)
        scale_p = np.maximum(np.abs(fd_p), 1.0)
        scale_x = np.maximum(np.abs(fd_x), 1.0)
        worst = max(worst, float(np.max(np.abs(pg[0] - fd_p) / scale_p)),
                    float(np.max(np.abs(ig[0] - fd_x) / scale_x)))
    return worst


# ---------------------------------------------------------------------------
# filter consistency against the Kalman oracle


def _bootstrap_filter_means(model, theta, ys, n, seed):
    """Weighted particle means of a bootstrap filter with adaptive resampling."""
    proposal = BootstrapProposal(model)
    run = rngmod.RunRng(seed)
    cloud = init_cloud(model, theta, ys[0], n, run.stream(0, rngmod.INIT))
    means = np.empty((ys.shape[0], model.d_x))
    means[0] = cloud.probabilities() @ cloud.particles
    for t in range(1, ys.shape[0]):
        resample = ess(cloud.log_weights) < 0.5 * n
        _, particles, log_w, _ = mutate_and_reweight(
            cloud, model, proposal, theta, ys[t], t, resample, run.stream(t, rngmod.SMOOTH))
        cloud = ParticleCloud(particles, log_w, np.zeros((n, theta.size)), t)
        means[t] = cloud.probabilities() @ cloud.particles
    return means


def filter_consistency_slope(n_values=(100, 1000, 10000), horizon: int = 500,
                             n_reps: int = 3, seed: int = 11):
    """Log-log slope of |particle mean - Kalman mean| against N.

    Returns (slope, errors) for a 1-d linear Gaussian model at the truth.
    """
    bundle = build_model("lgssm", {"dx": 1, "trans_std": 0.5, "obs_std": 0.5,
                                   "proposal": "bootstrap", "truth_seed": 3})
    model, theta = bundle.model, bundle.theta_true
    from .simulate import simulate

    errors = np.zeros(len(n_values))
    for rep in range(n_reps):
        ys, _ = simulate(model, theta, horizon, seed + rep)
        params = KalmanParams.from_model(model, theta)
        belief0 = GaussianBelief(model.initial_mean, np.diag(model.initial_std**2))
        kmeans, _ = kalman_filter(params, ys, belief0)
        for j, n in enumerate(n_values):
            pf = _bootstrap_filter_means(model, theta, ys, n, seed=97 * rep + j)
            errors[j] += np.mean(np.abs(pf - kmeans))
    errors /= n_reps
    slope = np.polyfit(np.log(np.asarray(n_values, dtype=float)), np.log(errors), 1)[0]
    return float(slope), errors


# ---------------------------------------------------------------------------
# bound monotonicity and gap


def colbo_curve(m_values=(1, 2, 4, 8, 16), replicates: int = 60000, seed: int = 5):
    """Monte Carlo bound estimates on a fixed (belief, y) with the exact value.

    Returns (estimates, standard errors, exact predictive log-likelihood).
    """
    bundle = build_model("lgssm", {"dx": 1, "trans_std": 0.5, "obs_std": 0.5,
                                   "proposal": "bootstrap", "truth_seed": 3})
    model, theta = bundle.model, bundle.theta_true
    belief = GaussianBelief(np.array([0.4]), np.array([[0.6]]))
    y = np.array([1.3])
    exact = exact_likfunc_lgssm(belief, KalmanParams.from_model(model, theta), y)
    estimates, ses = [], []
    for j, m in enumerate(m_values):
        est, se = mc_colbo(model, bundle.proposal, theta, belief, y, 1, m, replicates,
                           rngmod.stream(seed, step=j, role=rngmod.ORACLE))
        estimates.append(est)
        ses.append(se)
    return np.array(estimates), np.array(ses), exact


# ---------------------------------------------------------------------------
# gradient bias rate in the sample size M


def bias_rate_curve(m_values=(2, 4, 8, 16, 32, 64, 128, 256), n_particles: int = 10000,
                    n_clouds: int = 48, reps_per_cloud: int = 40, seed: int = 21):
    """Norm of (mean estimator - exact one-step score increment) per M.

    The cloud is i.i.d. from the exact time-zero filter with exact statistic
    values, so deviations isolate the estimator's finite-M bias.  Returns
    (norms, slope, target, standard errors of the norms).
    """
    model = LinearGaussianModel(1, trans_std=0.5, obs_std=0.5)
    theta = ParamVector(np.array([0.9, 1.1]), n_model=2)
    proposal = OptimalLgssmProposal(model)
    y0, y1 = np.array([0.9]), np.array([-0.4])

    # exact filter after y0 from the standard-normal initial law
    b = theta.model[1]
    sv2 = model.obs_std[0] ** 2
    post_prec = 1.0 + b * b / sv2
    post_mean = (b * y0[0] / sv2) / post_prec
    post_std = np.sqrt(1.0 / post_prec)

    ys = np.stack([y0, y1])
    target = (kalman_score(model, theta, ys)
              - kalman_score(model, theta, ys[:1]))

    norms, norm_ses = [], []
    for jm, m in enumerate(m_values):
        per_cloud = np.zeros((n_clouds, theta.size))
        for jc in range(n_clouds):
            gen = rngmod.stream(seed, step=jc, role=rngmod.INIT)
            particles = post_mean + post_std * gen.standard_normal((n_particles, 1))
            stats = model.score_emission(theta, particles, y0)
            cloud = ParticleCloud(particles, np.zeros(n_particles), stats, step=0)
            acc = np.zeros(theta.size)
            for jr in range(reps_per_cloud):
                g = osiwae_gradient(cloud, model, proposal, theta, y1, 1, m,
                                    rngmod.stream(seed + 1 + jm, step=jc * reps_per_cloud + jr,
                                                  role=rngmod.ORACLE))
                acc += g.values
            per_cloud[jc] = acc / reps_per_cloud
        mean_est = per_cloud.mean(axis=0)
        norms.append(float(np.linalg.norm(mean_est - target)))
        norm_ses.append(float(np.linalg.norm(per_cloud.std(axis=0, ddof=1))
                              / np.sqrt(n_clouds)))
    slope = float(np.polyfit(np.log(np.asarray(m_values, float)), np.log(norms), 1)[0])
    return np.array(norms), slope, target, np.array(norm_ses)


# ---------------------------------------------------------------------------
# smoothed-score fidelity


def smoothed_score_relative_error(backward_rule: Rule, n_particles: int = 5000,
                                  horizon: int = 50, n_seeds: int = 20, seed: int = 33):
    """Relative error of the smoothed-score estimate versus the exact score.

    The filter runs at a parameter away from the truth so the score has a
    healthy magnitude; estimates are averaged over seeds before comparing.
    """
    bundle = build_model("lgssm", {"dx": 1, "trans_std": 0.5, "obs_std": 0.5,
                                   "proposal": "bootstrap", "truth_seed": 3})
    model = bundle.model
    theta_eval = ParamVector(bundle.theta_true.values + np.array([-0.15, 0.1]), n_model=2)
    proposal = BootstrapProposal(model)
    schedule = SmoothingSchedule(resample=Rule("always"), backward=backward_rule)
    from .simulate import simulate

    ys, _ = simulate(model, bundle.theta_true, horizon, seed)
    exact = kalman_score(model, theta_eval, ys)
    estimates = np.zeros((n_seeds, theta_eval.size))
    for js in range(n_seeds):
        run = rngmod.RunRng(seed + 1 + js)
        cloud = init_cloud(model, theta_eval, ys[0], n_particles, run.stream(0, rngmod.INIT))
        for t in range(1, horizon + 1):
            cloud = adasmooth_step(cloud, model, proposal, theta_eval, ys[t], t, schedule,
                                   run.stream(t, rngmod.SMOOTH))
        estimates[js] = smoothed_expectation(cloud)
    mean_est = estimates.mean(axis=0)
    return float(np.linalg.norm(mean_est - exact) / np.linalg.norm(exact))


# ---------------------------------------------------------------------------
# desk-scale replicas of the headline experiments


def _run_learner(kind: str, bundle, ys, config: LearnerConfig, seed: int):
    learner = Learner(bundle.model, bundle.proposal, bundle.theta, config, kind, seed)
    learner.start(ys[0])
    for t in range(1, ys.shape[0]):
        learner.advance(ys[t])
    return learner


def lgssm_replica(n_seeds: int = 10, horizon: int = 20000, n_particles: int = 200,
                  m_large: int = 200, hidden: int = 64, base_seed: int = 100):
    """Parameter-learning comparison on a 2-d linear Gaussian model.

    Returns {kind: (initial MAEs, final MAEs)} over seeds for the
    importance-weighted learner, the score-free baseline, and recursive
    maximum likelihood.
    """
    from .simulate import simulate

    results = {kind: ([], []) for kind in ("osiwae", "ovsmc", "rml")}
    for js in range(n_seeds):
        model_cfg = {"dx": 2, "trans_std": 0.2, "obs_std": 0.5, "truth_seed": base_seed + js,
                     "hidden": hidden, "init_seed": base_seed + js}
        data_bundle = build_model("lgssm", model_cfg)
        ys, _ = simulate(data_bundle.model, data_bundle.theta_true, horizon, base_seed + js)
        truth = data_bundle.theta1_true_natural
        for kind in results:
            cfg_model = dict(model_cfg)
            if kind == "rml":
                cfg_model["proposal"] = "bootstrap"
            bundle = build_model("lgssm", cfg_model)
            config = LearnerConfig(n_particles=n_particles, m_large=m_large, m_small=5,
                                   schedule=SmoothingSchedule.default())
            learner = _run_learner(kind, bundle, ys, config, seed=base_seed + js)
            initial = float(np.mean(np.abs(bundle.theta.model - truth)))
            final = float(np.mean(np.abs(learner.theta.model - truth)))
            results[kind][0].append(initial)
            results[kind][1].append(final)
    return results


def _mean_filter_ess(model, proposal, theta, ys, n, seed):
    """Mean per-step ESS with always-on resampling (comparable across proposals)."""
    run = rngmod.RunRng(seed)
    cloud = init_cloud(model, theta, ys[0], n, run.stream(0, rngmod.INIT))
    values = []
    for t in range(1, ys.shape[0]):
        _, particles, log_w, _ = mutate_and_reweight(
            cloud, model, proposal, theta, ys[t], t, True, run.stream(t, rngmod.SMOOTH))
        cloud = ParticleCloud(particles, log_w, cloud.statistics, t)
        values.append(ess(log_w))
    return float(np.mean(values))


def growth_replica(train_horizon: int = 10000, n_particles: int = 500, m_large: int = 200,
                   hidden: int = 12, heldout_horizon: int = 2000, seed: int = 7,
                   probe=(0.1, 6.0, 1)):
    """Proposal adaptation on the growth model.

    Trains the importance-weighted learner, then compares the mean filter
    ESS with the learned proposal against a bootstrap filter on held-out
    data, and locates the learned proposal mean relative to the dominant
    mode of the true optimal kernel at the probe point.
    """
    from ..oracle import growth_optimal_logdensity
    from .simulate import simulate

    model_cfg = {"hidden": hidden, "init_seed": seed}
    bundle = build_model("growth", model_cfg)
    ys, _ = simulate(bundle.model, bundle.theta_true, train_horizon, seed)
    config = LearnerConfig(n_particles=n_particles, m_large=m_large, m_small=5,
                           schedule=SmoothingSchedule.default())
    learner = _run_learner("osiwae", bundle, ys, config, seed=seed)

    ys_held, _ = simulate(bundle.model, bundle.theta_true, heldout_horizon, seed + 1)
    ess_learned = _mean_filter_ess(bundle.model, bundle.proposal, learner.theta, ys_held,
                                   n_particles, seed + 2)
    ess_bootstrap = _mean_filter_ess(bundle.model, BootstrapProposal(bundle.model),
                                     learner.theta, ys_held, n_particles, seed + 2)

    x_probe, y_probe, t_probe = probe
    grid = np.linspace(-25.0, 25.0, 2001)
    optimal = growth_optimal_logdensity(bundle.model, bundle.theta_true, x_probe, y_probe,
                                        t_probe, grid)
    dominant_mode = float(grid[int(np.argmax(optimal))])
    mean, _, _ = bundle.proposal.mean_std(learner.theta, np.array([[x_probe]]),
                                          np.atleast_1d(y_probe), t_probe)
    learned_mode = float(mean[0, 0])
    return {"ess_learned": ess_learned, "ess_bootstrap": ess_bootstrap,
            "learned_mode": learned_mode, "optimal_mode": dominant_mode,
            "theta_final": learner.model.theta1_natural(learner.theta.model)}
