import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctmc_occupation.path_sim import CtmcPath

SYM = [[-1.0, 1.0], [1.0, -1.0]]
ASYM = [[-1.0, 1.0], [2.0, -2.0]]


@pytest.fixture
def sym():
    return np.array(SYM)


@pytest.fixture
def asym():
    return np.array(ASYM)


@pytest.fixture
def one_jump_path():
    # state 1 on [0, 0.4), state 2 on [0.4, 1]
    return CtmcPath(0, [0.4], [1], 1.0, 2)


@pytest.fixture
def two_jump_path():
    # indicator of state 2 jumps +1 at 0.3 and -1 at 0.7
    return CtmcPath(0, [0.3, 0.7], [1, 0], 1.0, 2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
