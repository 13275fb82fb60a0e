"""CLI, configuration, fixtures and report emission."""

from .config import ExperimentConfig, from_dict, load_config
from .fixtures import fixture
from .runner import run

__all__ = ["ExperimentConfig", "from_dict", "load_config", "fixture", "run"]
