import pytest

from _support import RESULTS, run_overfit


@pytest.fixture(scope="session")
def overfit_result():
    """The 5000-step overfit run, shared by the acceptance suite and the training tests."""
    return run_overfit(seed=0)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
