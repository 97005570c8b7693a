"""Configuration, simulation, experiment drivers, persistence, and the CLI."""

from .config import ConfigError, ExperimentConfig, from_mapping, load
from .run import METRICS_COLUMNS, RunResult, moving_average, read_metrics, run_experiment
from .simulate import read_stream, simulate, simulate_to_file, write_stream
