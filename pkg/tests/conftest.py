import numpy as np
import pytest

from fraclap.harness import fixture
from helpers import path_graph


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture
def cycle4():
    return fixture("cycle(4)")


@pytest.fixture
def path3():
    return path_graph()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
