"""
Pytest configuration and fixtures for ncjtsim tests

Provides small validated configurations, seeded generators and tiny
worlds shared across the unit and integration suites.
"""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
import yaml

from ncjtsim.core.config import RunConfig, validate_config
from ncjtsim.core.engine import build_world


def small_config_dict(**sections) -> dict:
    """Four TRPs, six PRBs and short runs; enough to exercise every phase quickly"""
    data = {
        "run": {"scheme": "nfncjt", "users_per_trp": 2, "max_coord": 2, "seeds": [1],
                "ttis": 300, "warmup_ttis": 0},
        "deployment": {"trp_count": 4, "rows": 2},
        "carrier": {"n_prb": 6},
        "channel": {"subbands": 2},
        "traffic": {"file_bytes": 20000, "lambda_per_s": 40.0, "scope": "network"},
        "logging": {"level": "WARNING"},
    }
    for section, values in sections.items():
        data.setdefault(section, {}).update(values)
    return data


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files"""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_config() -> RunConfig:
    return RunConfig()


@pytest.fixture
def small_config() -> RunConfig:
    return validate_config(small_config_dict())


@pytest.fixture
def make_config():
    """Factory for small configs with per-section overrides"""
    def _make(**sections) -> RunConfig:
        return validate_config(small_config_dict(**sections))
    return _make


@pytest.fixture
def small_world(small_config):
    return build_world(small_config, seed=7)


@pytest.fixture
def config_file(temp_dir):
    """Write a small config to YAML and return its path"""
    def _write(**sections) -> Path:
        path = temp_dir / "config.yaml"
        data = small_config_dict(**sections)
        data["run"]["out"] = str(temp_dir / "out")
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path
    return _write


# Pytest configuration
def pytest_configure(config):
    """Configure pytest"""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )


def pytest_collection_modifyitems(config, items):
    """Add markers based on test location"""
    for item in items:
        path = str(item.fspath)
        if "/unit/" in path:
            item.add_marker(pytest.mark.unit)
        elif "/integration/" in path:
            item.add_marker(pytest.mark.integration)
