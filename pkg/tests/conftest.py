import sys

import numpy as np
import pytest

from emdflow import _backend
from emdflow.instance import Instance

BACKENDS = ["python"] + (["compiled"] if _backend.compiled_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per available kernel backend."""
    saved = _backend.kernels
    _backend.use(request.param)
    yield request.param
    _backend.kernels = saved


def random_instance(rng, n_min=2, n_max=30, d=2, smax=20, side=100.0):
    n = int(rng.integers(n_min, n_max + 1))
    pts = rng.uniform(0.0, side, (n, d))
    mu = rng.integers(-smax, smax + 1, n)
    mu[-1] -= mu.sum()
    if not mu.any():
        mu[0], mu[1] = 1, -1
    return Instance.from_arrays(pts, mu)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
