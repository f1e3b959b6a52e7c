"""
Configuration Management

Resolves a RunConfig from layered sources: built-in defaults, config
files (YAML or JSON) in priority order, NCJTSIM_* environment variables
and finally command-line overrides.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from ncjtsim.core.config.config import RunConfig
from ncjtsim.core.exceptions import ConfigurationError

logger = logging.getLogger("ncjtsim.config")

ENV_PREFIX = "NCJTSIM_"


@dataclass
class ConfigSource:
    """Configuration source descriptor"""
    name: str
    path: str
    format: str  # json, yaml
    priority: int = 100  # Higher priority overrides lower


class ConfigManager:
    """Collects configuration sources and validates the merged result"""

    def __init__(self, environ: Optional[Mapping[str, str]] = None, use_dotenv: bool = True):
        self._sources: List[ConfigSource] = []
        self._overrides: Dict[str, Any] = {}
        if environ is None:
            if use_dotenv:
                load_dotenv(override=False)
            environ = os.environ
        self._environ = environ

    def add_source(self, name: str, path: str, format: str = "auto", priority: int = 100) -> None:
        """Add a configuration file source"""
        if format == "auto":
            format = self._detect_format(path)

        self._sources.append(ConfigSource(name=name, path=str(path), format=format, priority=priority))
        self._sources.sort(key=lambda s: s.priority)
        logger.debug(f"Added config source: {name} ({path})")

    def set_override(self, key: str, value: Any) -> None:
        """Set a dotted-key override, e.g. run.scheme"""
        self._set_nested_value(self._overrides, key, value)

    def _detect_format(self, path: str) -> str:
        ext = Path(path).suffix.lower()
        if ext == ".json":
            return "json"
        return "yaml"

    def _load_source(self, source: ConfigSource) -> Optional[Dict[str, Any]]:
        """Load configuration from a single source"""
        path = Path(source.path)

        if not path.exists():
            logger.warning(f"Config file not found: {source.path}; using defaults for its keys")
            return None

        try:
            with open(path, "r", encoding="utf-8") as f:
                if source.format == "json":
                    data = json.load(f)
                else:
                    data = yaml.safe_load(f)
        except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"cannot read config file {source.path}", cause=e)

        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"config file {source.path} must contain a mapping")
        return data

    def _load_environment(self) -> Dict[str, Any]:
        """NCJTSIM_RUN__SCHEME=dps maps to run.scheme"""
        config: Dict[str, Any] = {}
        for key, value in self._environ.items():
            if key.startswith(ENV_PREFIX):
                config_key = key[len(ENV_PREFIX):].lower().replace("__", ".")
                self._set_nested_value(config, config_key, self._convert_value(value))
        return config

    def _set_nested_value(self, config: Dict[str, Any], key: str, value: Any) -> None:
        keys = key.split(".")
        current = config

        for k in keys[:-1]:
            if k not in current or not isinstance(current[k], dict):
                current[k] = {}
            current = current[k]

        current[keys[-1]] = value

    @staticmethod
    def _convert_value(value: str) -> Any:
        """Convert string value to appropriate type"""
        lowered = value.lower()
        if lowered in ("true", "yes"):
            return True
        if lowered in ("false", "no"):
            return False

        try:
            if any(c in value for c in ".eE") and not value.isalpha():
                return float(value)
            return int(value)
        except ValueError:
            pass

        if value.startswith(("{", "[")):
            try:
                return json.loads(value)
            except json.JSONDecodeError:
                pass

        return value

    def _merge_config(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Merge two configuration dictionaries"""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_config(result[key], value)
            else:
                result[key] = value

        return result

    def merged(self) -> Dict[str, Any]:
        """Raw merged dictionary, before validation"""
        merged: Dict[str, Any] = {}
        for source in self._sources:
            data = self._load_source(source)
            if data:
                merged = self._merge_config(merged, data)
                logger.debug(f"Loaded config from source: {source.name}")
        merged = self._merge_config(merged, self._load_environment())
        return self._merge_config(merged, self._overrides)

    def resolve(self) -> RunConfig:
        """Merge every source and validate into a RunConfig"""
        return validate_config(self.merged())


def validate_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a raw dict, translating pydantic errors into ConfigurationError"""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err.get("loc", ())) or "<config>"
        value = err.get("input")
        if isinstance(value, dict):
            value = None
        allowed = err.get("msg", "")
        ctx = err.get("ctx") or {}
        if ctx:
            bounds = ", ".join(f"{k} {v}" for k, v in ctx.items() if k != "error")
            if bounds:
                allowed = f"{allowed} [{bounds}]"
        raise ConfigurationError("invalid configuration value", key=key, value=value,
                                 allowed=allowed, cause=None) from e


def parse_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                 environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Resolve file + flag overrides into a validated RunConfig.

    A missing file produces a defaults-only run. Unknown keys are rejected.
    """
    manager = ConfigManager(environ=environ, use_dotenv=environ is None)
    if path:
        manager.add_source("file", path, priority=100)
    for key, value in (overrides or {}).items():
        manager.set_override(key, value)
    config = manager.resolve()
    logger.debug(f"Resolved configuration for scheme={config.run.scheme}")
    return config
