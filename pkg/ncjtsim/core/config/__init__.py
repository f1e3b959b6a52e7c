"""Run configuration: pydantic model plus layered source resolution"""

from .config import RunConfig, SCHEMES
from .manager import ConfigManager, parse_config, validate_config

__all__ = ["RunConfig", "SCHEMES", "ConfigManager", "parse_config", "validate_config"]
