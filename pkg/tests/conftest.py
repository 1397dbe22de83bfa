# tests/conftest.py

import pathlib
import sys

import pytest

# Ensure the repo root (containing the ocs_arc package dir) is on sys.path.
ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run the minutes-long Monte Carlo checks",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo run taking minutes; needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
