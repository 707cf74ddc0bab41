import math
import sys

import numpy as np
import pytest

from ibc.analytic import Weights
from ibc.lingauss import example2_model, initial_belief


@pytest.fixture(scope="session")
def model():
    return example2_model()


@pytest.fixture(scope="session")
def belief(model):
    return initial_belief(model, [0.0, 0.0], np.diag([5.0, 0.1]))


@pytest.fixture(scope="session")
def weights():
    return Weights()


@pytest.fixture(scope="session")
def coef():
    """Scalar discretization coefficients computed by hand (independent of
    the matrix-exponential code)."""
    T0 = 0.1
    a2 = math.exp(-T0)
    a3 = 1.0 - a2
    d1 = 2.0 * T0
    # int_0^T0 2 (1 - e^-t) dt, int_0^T0 2 e^-2t dt, int_0^T0 2 (1 - e^-t)^2 dt
    d2 = 2.0 * (T0 - (1.0 - math.exp(-T0)))
    d3 = 1.0 - math.exp(-2.0 * T0)
    d4 = 2.0 * (T0 - 2.0 * (1.0 - math.exp(-T0)) + 0.5 * (1.0 - math.exp(-2.0 * T0)))
    return {"a1": 1.0, "a2": a2, "a3": a3, "b": a3, "d1": d1, "d2": d2, "d3": d3, "d4": d4}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
