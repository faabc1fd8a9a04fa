import time

import pytest

from siif_pdn.scenario import matrix_scenarios, run_many

# Filled by the acceptance suite; echoed in the terminal summary so the
# pass/fail lines survive output capturing.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def matrix():
    """All 15 (application, topology) scenarios with DC + transient, timed once."""
    t0 = time.perf_counter()
    runs = run_many(matrix_scenarios())
    return {"runs": runs, "elapsed": time.perf_counter() - t0}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
