"""Experiment driver: stream in, metrics/checkpoints/manifest out.

Metrics are written to a schema-versioned CSV whose contents are a pure
function of (config, seed); wall-clock timings go to a separate file so the
metrics CSV stays byte-reproducible across reruns.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..filtering import DegenerateCloudError
from ..learning import Learner
from ..models import build_model
from ..oracle import GaussianBelief, KalmanParams, kalman_step
from .checkpoint import load_into, save
from .config import ConfigError, ExperimentConfig
from .simulate import read_stream

METRICS_SCHEMA = "# osiwae-metrics v1"
METRICS_COLUMNS = ("step", "mae_model", "filter_mse", "ess", "learner", "seed")


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean; partial windows average the points available so far."""
    if window < 1:
        raise ValueError("window must be at least 1")
    series = np.asarray(series, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(series)])
    idx = np.arange(series.size)
    lo = np.maximum(idx - window + 1, 0)
    return (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)


@dataclass
class RunResult:
    metrics_path: Path
    checkpoint_path: Path
    manifest_path: Path
    learner: Learner
    status: str
    steps_done: int


class _KalmanTracker:
    """Tracks the exact filter mean under the data-generating parameters."""

    def __init__(self, gen_header: dict):
        gen = build_model(gen_header["kind"], gen_header["config"])
        self.params = KalmanParams.from_model(gen.model, gen.theta_true)
        self.model = gen.model
        self.belief = None

    def update(self, y: np.ndarray) -> np.ndarray:
        if self.belief is None:
            prior = GaussianBelief(self.model.initial_mean, np.diag(self.model.initial_std**2))
            b = self.params.observation
            innov = b @ prior.cov @ b.T + self.params.obs_cov
            gain = np.linalg.solve(innov, b @ prior.cov).T
            mean = prior.mean + gain @ (y - b @ prior.mean)
            shrink = np.eye(prior.mean.size) - gain @ b
            cov = shrink @ prior.cov @ shrink.T + gain @ self.params.obs_cov @ gain.T
            self.belief = GaussianBelief(mean, 0.5 * (cov + cov.T))
        else:
            self.belief, _ = kalman_step(self.belief, self.params, y)
        return self.belief.mean


def _metrics_row(learner: Learner, truth_natural: np.ndarray, kalman_mean, cfg) -> str:
    cloud = learner.cloud
    if learner.theta.n_model:
        natural = learner.model.theta1_natural(learner.theta.model)
        mae = float(np.mean(np.abs(natural - truth_natural)))
    else:
        mae = float("nan")
    if kalman_mean is not None:
        pf_mean = cloud.probabilities() @ cloud.particles
        mse = float(np.mean((pf_mean - kalman_mean) ** 2))
    else:
        mse = float("nan")
    return (f"{cloud.step},{mae!r},{mse!r},{cloud.ess()!r},{learner.kind},{cfg.seed}")


def build_learner(cfg: ExperimentConfig) -> Learner:
    bundle = build_model(cfg.model, cfg.model_config)
    return Learner(bundle.model, bundle.proposal, bundle.theta,
                   cfg.learner_config(), cfg.learner, cfg.seed)


def run_experiment(cfg: ExperimentConfig, resume_from: str | None = None) -> RunResult:
    """Stream the observations through the configured learner.

    Writes metrics.csv, timings.csv, periodic and final checkpoints, a
    manifest, and a plotting script into cfg.out_dir.  A degenerate-cloud
    abort is recorded in the manifest (with the failing step) and re-raised.
    """
    header, ys = read_stream(cfg.stream)
    if header["kind"] != cfg.model:
        raise ConfigError(f"stream holds {header['kind']!r} data but config says {cfg.model!r}")
    horizon = cfg.horizon if cfg.horizon is not None else ys.shape[0] - 1
    if horizon > ys.shape[0] - 1:
        raise ConfigError(f"horizon {horizon} exceeds stream length {ys.shape[0] - 1}")
    truth_natural = np.asarray(header["theta1_natural"], dtype=np.float64)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    timings_path = out_dir / "timings.csv"
    manifest_path = out_dir / "manifest.json"
    final_ckpt = out_dir / "checkpoint_final.bin"

    learner = build_learner(cfg)
    tracker = _KalmanTracker(header) if cfg.model == "lgssm" else None
    if resume_from is not None:
        load_into(resume_from, learner)
        if tracker is not None:
            for t in range(learner.cloud.step + 1):
                tracker.update(ys[t])
        start_step = learner.cloud.step + 1
    else:
        learner.start(ys[0])
        if tracker is not None:
            tracker.update(ys[0])
        start_step = 1

    status = "completed"
    failing_step = None
    wall_total = 0
    rows = 0
    try:
        with open(metrics_path, "w", encoding="utf-8", newline="\n") as metrics, \
                open(timings_path, "w", encoding="utf-8", newline="\n") as timings:
            metrics.write(METRICS_SCHEMA + "\n")
            metrics.write(",".join(METRICS_COLUMNS) + "\n")
            timings.write("step,wall_ns\n")
            if resume_from is None:
                kmean = tracker.belief.mean if tracker is not None else None
                metrics.write(_metrics_row(learner, truth_natural, kmean, cfg) + "\n")
                rows += 1
            for t in range(start_step, horizon + 1):
                tick = time.perf_counter_ns()
                try:
                    learner.advance(ys[t])
                except DegenerateCloudError:
                    status = "aborted"
                    failing_step = t
                    raise
                elapsed = time.perf_counter_ns() - tick
                wall_total += elapsed
                kmean = tracker.update(ys[t]) if tracker is not None else None
                if t % cfg.metric_every == 0:
                    metrics.write(_metrics_row(learner, truth_natural, kmean, cfg) + "\n")
                    rows += 1
                timings.write(f"{t},{elapsed}\n")
                if t % cfg.checkpoint_every == 0 and t < horizon:
                    save(out_dir / f"checkpoint_step{t}.bin", learner)
    finally:
        if learner.cloud is not None:
            save(final_ckpt, learner)
        steps_done = learner.cloud.step if learner.cloud is not None else 0
        manifest = {
            "status": status,
            "failing_step": failing_step,
            "steps_done": int(steps_done),
            "metric_rows": rows,
            "mean_step_ns": wall_total / max(steps_done - start_step + 1, 1),
            "config": cfg.to_mapping(),
        }
        with open(manifest_path, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
        _write_plot_script(out_dir)

    return RunResult(metrics_path=metrics_path, checkpoint_path=final_ckpt,
                     manifest_path=manifest_path, learner=learner, status=status,
                     steps_done=int(learner.cloud.step))


def read_metrics(path: str | Path) -> dict:
    """Load a metrics CSV into column arrays."""
    with open(path, "r", encoding="utf-8") as handle:
        schema = handle.readline().strip()
        if schema != METRICS_SCHEMA:
            raise ValueError(f"unexpected metrics schema line {schema!r}")
        names = handle.readline().strip().split(",")
        rows = [line.strip().split(",") for line in handle if line.strip()]
    cols = {}
    for j, name in enumerate(names):
        if name in ("learner",):
            cols[name] = [row[j] for row in rows]
        else:
            cols[name] = np.array([float(row[j]) for row in rows])
    return cols


_PLOT_SCRIPT = '''"""Generated plotting helper; reads metrics.csv in this directory."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).parent
with open(here / "metrics.csv") as fh:
    fh.readline()  # schema
    rows = list(csv.DictReader(fh))

steps = [float(r["step"]) for r in rows]
fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)
for ax, col, label in [(axes[0], "mae_model", "model-parameter MAE"),
                       (axes[1], "filter_mse", "filter-mean MSE vs oracle"),
                       (axes[2], "ess", "effective sample size")]:
    vals = [float(r[col]) for r in rows]
    ax.plot(steps, vals)
    ax.set_ylabel(label)
axes[-1].set_xlabel("step")
fig.tight_layout()
fig.savefig(here / "metrics.png", dpi=120)
print("wrote", here / "metrics.png")
'''


def _write_plot_script(out_dir: Path) -> None:
    with open(out_dir / "plot_metrics.py", "w", encoding="utf-8") as handle:
        handle.write(_PLOT_SCRIPT)
