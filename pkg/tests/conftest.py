import copy

import pytest

from cyberweak.scenario import builtin_scenario, to_document


@pytest.fixture(scope="session")
def base():
    return builtin_scenario(0)


@pytest.fixture(scope="session")
def open_net():
    return builtin_scenario(3)


@pytest.fixture
def doc(base):
    return copy.deepcopy(to_document(base))


def pytest_terminal_summary(terminalreporter):
    from support import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
