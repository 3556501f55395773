import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hartreelab.radial import build_grid
from hartreelab.solver import SolverConfig, minimize_action


@pytest.fixture(scope="session")
def grid():
    return build_grid(2048, 60.0)


@pytest.fixture(scope="session")
def minimizers():
    """Converged action minimizers keyed by omega (default solver settings)."""
    out = {}
    for omega in (0.05, 0.1, 0.2):
        out[omega] = minimize_action(SolverConfig(omega=omega))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
