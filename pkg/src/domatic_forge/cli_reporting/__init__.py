"""Experiment plumbing: file formats, config parsing, CSV reporting, the
config-driven runner, and the command-line interface."""

from .config import ConfigError, ExperimentConfig, parse_config
from .runner import RunRecord, run, verify_artifacts

__all__ = ["ConfigError", "ExperimentConfig", "parse_config",
           "RunRecord", "run", "verify_artifacts"]
