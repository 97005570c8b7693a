"""Command-line interface.

Subcommands: simulate (write an observation stream), fit (run a learner on
a stream), oracle (exact Kalman output for a linear Gaussian stream), check
(invariant and rate checks with measured numbers), dump-proposal (grid dump
of learned/optimal/prior proposal densities from a checkpoint).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checks
from .checkpoint import load_into
from .config import load as load_config
from .dump import PROBE_T, PROBE_X, PROBE_Y, write_proposal_dump
from .run import build_learner, run_experiment
from .simulate import read_stream, simulate_to_file


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    horizon = args.horizon if args.horizon is not None else cfg.horizon
    if horizon is None:
        print("error: no horizon given (config or --horizon)", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else cfg.seed
    out = Path(args.out) if args.out else Path(cfg.stream)
    out.parent.mkdir(parents=True, exist_ok=True)
    simulate_to_file(cfg.model, cfg.model_config, horizon, seed, out,
                     write_latents=not args.no_latents)
    print(f"wrote {out} ({horizon + 1} observations)")
    return 0


def _cmd_fit(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, resume_from=args.resume)
    print(f"{result.status}: {result.steps_done} steps")
    print(f"metrics:    {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0 if result.status == "completed" else 1


def _cmd_oracle(args) -> int:
    from ..models import build_model
    from ..oracle import GaussianBelief, KalmanParams, kalman_filter

    header, ys = read_stream(args.stream)
    if header["kind"] != "lgssm":
        print("error: the Kalman oracle applies to lgssm streams only", file=sys.stderr)
        return 2
    bundle = build_model(header["kind"], header["config"])
    params = KalmanParams.from_model(bundle.model, bundle.theta_true)
    belief0 = GaussianBelief(bundle.model.initial_mean, np.diag(bundle.model.initial_std**2))
    means, increments = kalman_filter(params, ys, belief0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# osiwae-kalman v1\n")
        cols = ",".join(f"mean{i}" for i in range(means.shape[1]))
        handle.write(f"t,{cols},loglik_increment\n")
        for t in range(means.shape[0]):
            mean_txt = ",".join(repr(v) for v in means[t])
            handle.write(f"{t},{mean_txt},{increments[t]!r}\n")
    print(f"wrote {out} (total loglik {increments.sum():.6f})")
    return 0


def _cmd_check(args) -> int:
    quick = not args.full
    results = []

    err = checks.max_fd_error_weight_gradient("lgssm", {"dx": 2, "hidden": 8},
                                              n_points=20 if quick else 100)
    results.append(("weight-gradient lgssm", err < 1e-5, f"max rel err {err:.2e}"))
    err = checks.max_fd_error_weight_gradient("growth", {"hidden": 8},
                                              n_points=20 if quick else 100)
    results.append(("weight-gradient growth", err < 1e-5, f"max rel err {err:.2e}"))
    err = checks.max_fd_error_landmark_score(n_points=20 if quick else 100)
    results.append(("landmark-score slam", err < 1e-5, f"max rel err {err:.2e}"))
    err = checks.max_fd_error_mlp(n_nets=20 if quick else 100)
    results.append(("mlp backward", err < 1e-6, f"max rel err {err:.2e}"))

    slope, _ = checks.filter_consistency_slope(
        n_values=(100, 1000, 10000), horizon=200 if quick else 500, n_reps=1 if quick else 3)
    results.append(("filter consistency", abs(slope + 0.5) < 0.2, f"slope {slope:+.3f}"))

    est, se, exact = checks.colbo_curve(replicates=20000 if quick else 60000)
    mono = all(est[j + 1] - est[j] > -3.0 * np.hypot(se[j], se[j + 1])
               for j in range(len(est) - 1))
    gap_ok = (exact - est[-1]) < 0.5 * (exact - est[1])
    results.append(("bound monotone in M", mono,
                    f"estimates {np.array2string(est, precision=4)} exact {exact:.4f}"))
    results.append(("bound gap shrinks", gap_ok,
                    f"gap(16)={exact - est[-1]:.4f} gap(2)={exact - est[1]:.4f}"))

    if not quick:
        _, slope, _, _ = checks.bias_rate_curve()
        results.append(("gradient bias rate", abs(slope + 1.0) < 0.25, f"slope {slope:+.3f}"))
        from ..smoothing import Rule
        rel = checks.smoothed_score_relative_error(Rule("always"))
        results.append(("smoothed score (backward always)", rel < 0.05, f"rel err {rel:.3%}"))
        rel = checks.smoothed_score_relative_error(Rule("every_k", 5))
        results.append(("smoothed score (backward every 5)", rel < 0.05, f"rel err {rel:.3%}"))

    width = max(len(name) for name, _, _ in results)
    failures = 0
    for name, passed, detail in results:
        mark = "PASS" if passed else "FAIL"
        failures += 0 if passed else 1
        print(f"[{mark}] {name:<{width}}  {detail}")
    return 0 if failures == 0 else 1


def _cmd_dump_proposal(args) -> int:
    cfg = load_config(args.config)
    learner = build_learner(cfg)
    load_into(args.checkpoint, learner)
    from ..models import build_model

    bundle = build_model(cfg.model, cfg.model_config)
    grid = np.linspace(args.grid_lo, args.grid_hi, args.grid_n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_proposal_dump(out, bundle, learner.theta, args.x, args.y, args.t, grid)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="osiwae",
                                     description="online variational inference for state-space models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a model and write the observation stream")
    p.add_argument("config")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="stream path (default: the config's stream)")
    p.add_argument("--no-latents", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="run a learner over a stream")
    p.add_argument("config")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("oracle", help="exact Kalman means and log-likelihood for an lgssm stream")
    p.add_argument("stream")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("check", help="run invariant/oracle checks and print measured numbers")
    p.add_argument("--full", action="store_true", help="include the slow rate checks")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("dump-proposal", help="grid dump of proposal log-densities from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--x", type=float, default=PROBE_X)
    p.add_argument("--y", type=float, default=PROBE_Y)
    p.add_argument("--t", type=int, default=PROBE_T)
    p.add_argument("--grid-lo", type=float, default=-25.0)
    p.add_argument("--grid-hi", type=float, default=25.0)
    p.add_argument("--grid-n", type=int, default=1001)
    p.set_defaults(func=_cmd_dump_proposal)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
