"""UAV trajectory-planning simulator with a trend-prediction DQN agent."""

from .config import ConfigError, ScenarioConfig, load_config

__all__ = ["ScenarioConfig", "ConfigError", "load_config"]
__version__ = "0.1.0"
