import numpy as np
import pytest

from slenat import make_params
from slenat.acceptance import default_table
from slenat.hitting import build_phi_table


@pytest.fixture(scope="session")
def p83():
    return make_params(8.0 / 3.0)


@pytest.fixture(scope="session")
def table83():
    """The phi table shared by the acceptance run (16 x 16 nodes, 600 samples each)."""
    return default_table(8.0 / 3.0, 600, 0)


@pytest.fixture(scope="session")
def small_table2():
    """A coarse kappa = 2 table for unit tests."""
    return build_phi_table(8, 8, 200, make_params(2.0), 11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one line per acceptance check; printed in the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
