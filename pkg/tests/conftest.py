"""Pytest configuration — project root on sys.path, opt-in slow Monte Carlo tests."""
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path so imports work
sys.path.insert(0, str(Path(__file__).parent.parent))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-size Monte Carlo checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.getenv("GDPC_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="full-size Monte Carlo check; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
