"""Fixtures for magsep tests."""

from __future__ import annotations

from typing import Any

import pytest

from magsep.const import ENV_WORKERS
from magsep.transport import CellSpecies, ChannelScenario

from tests import helper


def pytest_addoption(parser: pytest.Parser) -> None:
    """Add the --run-slow option."""
    parser.addoption("--run-slow", action="store_true", default=False, help="Run slow statistical tests")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    """Skip slow tests unless --run-slow is given."""
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rbc() -> CellSpecies:
    """Return a deoxygenated red blood cell."""
    return helper.get_rbc()


@pytest.fixture
def wbc() -> CellSpecies:
    """Return a white blood cell."""
    return helper.get_wbc()


@pytest.fixture
def scenario() -> ChannelScenario:
    """Return the short test channel."""
    return helper.get_scenario()


@pytest.fixture
def document() -> dict[str, Any]:
    """Return a small scenario document."""
    return helper.get_document()


@pytest.fixture(autouse=True)
def single_worker(request: pytest.FixtureRequest, monkeypatch: pytest.MonkeyPatch) -> None:
    """Do not inherit a worker count from the environment, except in slow tests."""
    if request.node.get_closest_marker("slow") is None:
        monkeypatch.delenv(ENV_WORKERS, raising=False)
