"""Config-driven experiment runner, SVG charts and the command-line entry point."""
from .config import ConfigError, ExperimentConfig, load_config, shipped_configs
from .runner import ExperimentManifest, TrialError, run_experiment, run_trial
from .svg import Series, render_svg

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentManifest",
    "Series",
    "TrialError",
    "load_config",
    "render_svg",
    "run_experiment",
    "run_trial",
    "shipped_configs",
]
