"""Data simulation and the observation-stream file format.

A stream file is a CSV with a schema-versioned comment header that embeds
the generating model's build config and true model block as JSON.  Latent
states go to a separate file; they exist for diagnostics only and are never
read by a learner.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import rng as rngmod
from ..models import ModelBundle, build_model
from ..params import ParamVector
from ..ssm import StateSpaceModel

STREAM_MAGIC = "# osiwae-stream v1"


def simulate(model: StateSpaceModel, theta_true: ParamVector, horizon: int, seed: int):
    """Simulate observations y_{0:T} and the latent trace x_{0:T}.

    Deterministic per seed.  The latent trace is returned for diagnostics
    only.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    gen = rngmod.stream(seed, role=rngmod.SIMULATE)
    xs = np.empty((horizon + 1, model.d_x))
    ys = np.empty((horizon + 1, model.d_y))
    x = model.sample_initial(1, gen)
    xs[0] = x[0]
    ys[0] = model.sample_emission(theta_true, x, 0, gen)[0]
    for t in range(1, horizon + 1):
        x = model.sample_transition(theta_true, x, t, gen)
        xs[t] = x[0]
        ys[t] = model.sample_emission(theta_true, x, t, gen)[0]
    return ys, xs


def write_stream(path: str | Path, bundle: ModelBundle, model_config: dict,
                 ys: np.ndarray, seed: int, latents: np.ndarray | None = None) -> None:
    path = Path(path)
    header = {
        "kind": bundle.kind,
        "config": model_config,
        "seed": seed,
        "theta1_raw": bundle.theta_true.model.tolist(),
        "theta1_natural": bundle.theta1_true_natural.tolist(),
    }
    cols = ",".join(f"y{i}" for i in range(ys.shape[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(STREAM_MAGIC + "\n")
        handle.write("# generator: " + json.dumps(header, sort_keys=True) + "\n")
        handle.write("t," + cols + "\n")
        for t, row in enumerate(ys):
            handle.write(str(t) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    if latents is not None:
        lat_path = path.with_suffix(".latents.csv")
        cols = ",".join(f"x{i}" for i in range(latents.shape[1]))
        with open(lat_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("# latent trace (diagnostics only; never fed to learners)\n")
            handle.write("t," + cols + "\n")
            for t, row in enumerate(latents):
                handle.write(str(t) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def read_stream(path: str | Path):
    """Parse a stream file; returns (header dict, observations (T+1, d_y))."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        magic = handle.readline().strip()
        if magic != STREAM_MAGIC:
            raise ValueError(f"{path} is not a stream file (bad magic {magic!r})")
        gen_line = handle.readline().strip()
        prefix = "# generator: "
        if not gen_line.startswith(prefix):
            raise ValueError(f"{path} is missing its generator header")
        header = json.loads(gen_line[len(prefix):])
        handle.readline()  # column names
        rows = [line.strip().split(",")[1:] for line in handle if line.strip()]
    ys = np.array([[float(v) for v in row] for row in rows])
    return header, ys


def simulate_to_file(kind: str, model_config: dict, horizon: int, seed: int,
                     out_path: str | Path, write_latents: bool = True) -> ModelBundle:
    bundle = build_model(kind, model_config)
    ys, xs = simulate(bundle.model, bundle.theta_true, horizon, seed)
    write_stream(out_path, bundle, model_config, ys, seed, latents=xs if write_latents else None)
    return bundle
