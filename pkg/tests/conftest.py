import numpy as np
import pytest

from ckis import Embedding, Kernel

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_embedding(rng, m, kernel, spread=3.0, signed=True):
    pts = rng.uniform(-spread, spread, size=(m, kernel.dim)) * kernel.bandwidth
    coeffs = rng.normal(size=m) if signed else rng.uniform(0.1, 2.0, size=m)
    return Embedding(pts, coeffs, kernel)


@pytest.fixture
def unit_kernel():
    return Kernel(1.0)
