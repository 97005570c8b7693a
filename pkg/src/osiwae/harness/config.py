"""Run configuration: one flat key-value document per experiment.

The file is YAML restricted to a single flat mapping.  Keys prefixed with
``model_`` are stripped and forwarded to the model builder; everything else
must be a known run key.  Unknown keys are hard errors, because a silently
ignored typo corrupts an experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..learning import LEARNER_KINDS, LearnerConfig
from ..smoothing import Rule, SmoothingSchedule


class ConfigError(ValueError):
    pass


_RUN_KEYS = {
    "learner": str,
    "model": str,
    "stream": str,
    "out_dir": str,
    "seed": int,
    "horizon": int,
    "n_particles": int,
    "m_large": int,
    "m_small": int,
    "resample_rule": str,
    "backward_rule": str,
    "rate_model": float,
    "rate_proposal": float,
    "clip_norm": float,
    "metric_every": int,
    "checkpoint_every": int,
}

_DEFAULTS = {
    "m_small": 5,
    "resample_rule": "ess:0.5",
    "backward_rule": "every:5",
    "rate_model": 1e-3,
    "rate_proposal": 1e-3,
    "clip_norm": 1e3,
    "metric_every": 10,
    "checkpoint_every": 5000,
    "horizon": None,
}

_REQUIRED = ("learner", "model", "stream", "out_dir", "seed", "n_particles", "m_large")


@dataclass
class ExperimentConfig:
    learner: str
    model: str
    stream: str
    out_dir: str
    seed: int
    n_particles: int
    m_large: int
    m_small: int = 5
    resample_rule: str = "ess:0.5"
    backward_rule: str = "every:5"
    rate_model: float = 1e-3
    rate_proposal: float = 1e-3
    clip_norm: float | None = 1e3
    metric_every: int = 10
    checkpoint_every: int = 5000
    horizon: int | None = None
    model_config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learner not in LEARNER_KINDS:
            raise ConfigError(f"unknown learner {self.learner!r}; choose from {LEARNER_KINDS}")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.metric_every < 1 or self.checkpoint_every < 1:
            raise ConfigError("cadences must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def learner_config(self) -> LearnerConfig:
        schedule = SmoothingSchedule(resample=Rule.parse(self.resample_rule),
                                     backward=Rule.parse(self.backward_rule))
        clip = self.clip_norm if self.clip_norm and self.clip_norm > 0 else None
        return LearnerConfig(n_particles=self.n_particles, m_large=self.m_large,
                             m_small=self.m_small, schedule=schedule,
                             rate_model=self.rate_model, rate_proposal=self.rate_proposal,
                             clip_norm=clip)

    def to_mapping(self) -> dict:
        out = {}
        for key in _RUN_KEYS:
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        for key, value in self.model_config.items():
            out[f"model_{key}"] = value
        return out


def from_mapping(mapping: dict) -> ExperimentConfig:
    if not isinstance(mapping, dict):
        raise ConfigError("config must be a flat key-value mapping")
    run_kwargs = {}
    model_config = {}
    for key, value in mapping.items():
        if not isinstance(key, str):
            raise ConfigError(f"config keys must be strings, got {key!r}")
        if key.startswith("model_"):
            model_config[key[len("model_"):]] = value
            continue
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        caster = _RUN_KEYS[key]
        try:
            run_kwargs[key] = caster(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    missing = [key for key in _REQUIRED if key not in run_kwargs]
    if missing:
        raise ConfigError(f"missing required config keys: {missing}")
    for key, default in _DEFAULTS.items():
        run_kwargs.setdefault(key, default)
    return ExperimentConfig(model_config=model_config, **run_kwargs)


def load(path: str | Path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle)
    if data is None:
        raise ConfigError(f"empty config file {path}")
    cfg = from_mapping(data)
    base = Path(path).parent
    if not Path(cfg.stream).is_absolute():
        cfg.stream = str(base / cfg.stream)
    if not Path(cfg.out_dir).is_absolute():
        cfg.out_dir = str(base / cfg.out_dir)
    return cfg
