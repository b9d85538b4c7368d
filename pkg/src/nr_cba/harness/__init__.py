"""Experiment runner: configuration, dataset generation, training, evaluation and sweeps."""
from .config import ExperimentConfig, Scenario, load_config

__all__ = ["ExperimentConfig", "Scenario", "load_config"]
