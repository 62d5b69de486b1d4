import pytest
from hypothesis import HealthCheck, settings

from txnet.corpus import load_fixture

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def three():
    return load_fixture("three-transactions")


@pytest.fixture(scope="session")
def petri():
    return load_fixture("petri-1")


@pytest.fixture(scope="session")
def erc721():
    return load_fixture("erc721-block")
