import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def unit_at(degrees):
    a = math.radians(degrees)
    return np.array([math.cos(a), math.sin(a)])


@pytest.fixture
def three_refs():
    """Unit vectors at 0, 90 and 45 degrees (in that row order)."""
    return np.stack([unit_at(0), unit_at(90), unit_at(45)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
