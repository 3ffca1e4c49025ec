import pytest

from sapg.truss import build_paper_instance

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def default_problem():
    return build_paper_instance()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
