import pytest

from qpspec import golden_cf, make_amo, make_maryland

# one pass/fail line per acceptance criterion, shown after the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden40():
    return golden_cf(40)


@pytest.fixture(scope="session")
def amo2():
    return make_amo(2.0)


@pytest.fixture(scope="session")
def maryland1():
    return make_maryland(1.0)
