"""Shared fixtures: packaged fixture resources, scripted engines, helpers."""

from __future__ import annotations

import pytest

from tourguide.config import ServerConfig, data_path, load_resources
from tourguide.runner import DialogueScript

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


@pytest.fixture(scope="session")
def resources():
    return load_resources()


@pytest.fixture(scope="session")
def catalog(resources):
    return resources.catalog


@pytest.fixture(scope="session")
def hub(resources):
    return resources.hub


@pytest.fixture(scope="session")
def spots(resources):
    return resources.hub.spots


@pytest.fixture(scope="session")
def prompt_engine(resources):
    return resources.prompts


@pytest.fixture(scope="session")
def full_script():
    return DialogueScript.from_file(data_path("scripts", "full_session.txt"))


@pytest.fixture()
def server_config(tmp_path):
    return ServerConfig(
        script_path=str(data_path("scripts", "demo_backend.txt")),
        log_dir=str(tmp_path / "logs"),
        max_sessions=4,
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")
