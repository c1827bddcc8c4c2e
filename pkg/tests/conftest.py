import math

import numpy as np
import pytest

from fpl.operators import get_operator

# cos(t/2) start point and the published Picard iterates for it (rows 0-9)
S0 = 1.658950
PICARD_COLUMN = [
    1.658950, 0.675263, 0.943542, 0.890765, 0.902446,
    0.899914, 0.900466, 0.900346, 0.900372, 0.900366,
]

ACCEPTANCE_LINES: list[str] = []


def brent_fixed_point(fn, lo, hi):
    """Independent root of fn(t) - t via scipy's Brent solver."""
    from scipy.optimize import brentq

    return brentq(lambda t: fn(t) - t, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)


@pytest.fixture(scope="session")
def cos_half():
    return get_operator("cos_half")


@pytest.fixture(scope="session")
def s_star():
    return brent_fixed_point(lambda t: math.cos(t / 2), 0.0, math.pi)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
