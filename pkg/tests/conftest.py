import functools

import pytest

from sdn_evb.checker import explore
from sdn_evb.scenario import shipped

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def scenario(name):
    return shipped(name)


@functools.lru_cache(maxsize=None)
def full_graph(name, level):
    """Complete reachable graph of a shipped scenario, built once per session."""
    return explore(scenario(name).initial_state(level), level)


@pytest.fixture
def s1():
    return scenario("s1")


@pytest.fixture
def s2():
    return scenario("s2")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
