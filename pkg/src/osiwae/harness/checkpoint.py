"""Length-prefixed binary checkpoints enabling bit-exact resume.

Layout (all integers little-endian unsigned 64-bit, arrays little-endian
float64 preceded by their element count):

    magic   4 bytes  b"OSWC"
    version u64      currently 1
    seed    u64      run seed (streams are derived from seed and step,
                     so no generator state needs to be carried)
    step    u64      index of the last processed observation
    n_model u64      model-block size of theta
    d_x     u64      latent dimension
    kind    u64      learner kind code (0 osiwae, 1 ovsmc, 2 rml)
    theta            array (p)
    adam_model       count u64, rate f64, m array (p), v array (p)
    adam_proposal    count u64, rate f64, m array (p), v array (p)
    prev_smoothed    array (p)      rml's stored smoothed score; zeros else
    particles        array (N*d_x)
    log_weights      array (N)
    statistics       array (N*p)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..filtering import ParticleCloud
from ..learning import AdamState, Learner
from ..params import ParamVector

MAGIC = b"OSWC"
VERSION = 1
_KIND_CODES = {"osiwae": 0, "ovsmc": 1, "rml": 2}
_KIND_NAMES = {code: name for name, code in _KIND_CODES.items()}


def _write_u64(handle, value: int) -> None:
    handle.write(struct.pack("<Q", int(value)))


def _write_f64(handle, value: float) -> None:
    handle.write(struct.pack("<d", float(value)))


def _write_array(handle, arr: np.ndarray) -> None:
    flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
    _write_u64(handle, flat.size)
    handle.write(flat.tobytes())


def _read_u64(handle) -> int:
    return struct.unpack("<Q", handle.read(8))[0]


def _read_f64(handle) -> float:
    return struct.unpack("<d", handle.read(8))[0]


def _read_array(handle) -> np.ndarray:
    size = _read_u64(handle)
    return np.frombuffer(handle.read(8 * size), dtype="<f8").copy()


def _write_adam(handle, state: AdamState) -> None:
    _write_u64(handle, state.count)
    _write_f64(handle, state.rate)
    _write_array(handle, state.m)
    _write_array(handle, state.v)


def _read_adam(handle) -> AdamState:
    count = _read_u64(handle)
    rate = _read_f64(handle)
    m = _read_array(handle)
    v = _read_array(handle)
    return AdamState(m=m, v=v, count=count, rate=rate)


def save(path: str | Path, learner: Learner) -> None:
    if learner.cloud is None:
        raise ValueError("cannot checkpoint a learner that has not started")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        _write_u64(handle, VERSION)
        _write_u64(handle, learner.rng.seed)
        _write_u64(handle, learner.cloud.step)
        _write_u64(handle, learner.theta.n_model)
        _write_u64(handle, learner.model.d_x)
        _write_u64(handle, _KIND_CODES[learner.kind])
        _write_array(handle, learner.theta.values)
        _write_adam(handle, learner.adam_model)
        _write_adam(handle, learner.adam_proposal)
        _write_array(handle, learner.prev_smoothed)
        _write_array(handle, learner.cloud.particles)
        _write_array(handle, learner.cloud.log_weights)
        _write_array(handle, learner.cloud.statistics)


def load_into(path: str | Path, learner: Learner) -> Learner:
    """Restore a checkpoint into a freshly built learner of the same shape."""
    with open(path, "rb") as handle:
        if handle.read(4) != MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        version = _read_u64(handle)
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        seed = _read_u64(handle)
        step = _read_u64(handle)
        n_model = _read_u64(handle)
        d_x = _read_u64(handle)
        kind = _KIND_NAMES[_read_u64(handle)]
        theta_values = _read_array(handle)
        adam_model = _read_adam(handle)
        adam_proposal = _read_adam(handle)
        prev_smoothed = _read_array(handle)
        particles = _read_array(handle)
        log_weights = _read_array(handle)
        statistics = _read_array(handle)
    if kind != learner.kind:
        raise ValueError(f"checkpoint is for learner {kind!r}, not {learner.kind!r}")
    if n_model != learner.theta.n_model or theta_values.size != learner.theta.size:
        raise ValueError("checkpoint parameter layout does not match the configured model")
    if seed != learner.rng.seed:
        raise ValueError(f"checkpoint seed {seed} does not match configured seed {learner.rng.seed}")
    n = log_weights.size
    learner.theta = ParamVector(theta_values, n_model)
    learner.adam_model = adam_model
    learner.adam_proposal = adam_proposal
    learner.prev_smoothed = prev_smoothed
    learner.cloud = ParticleCloud(particles=particles.reshape(n, d_x),
                                  log_weights=log_weights,
                                  statistics=statistics.reshape(n, theta_values.size),
                                  step=step)
    return learner
