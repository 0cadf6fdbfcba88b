import functools

import numpy as np
import pytest

from sgfem.assembly import Discretization
from sgfem.mesh import uniform_mesh


@functools.lru_cache(maxsize=None)
def uniform_disc(n, variant):
    """Discretizations are immutable apart from their caches, so tests share them."""
    return Discretization(uniform_mesh(n), variant)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
