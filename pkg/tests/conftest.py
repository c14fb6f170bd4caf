import numpy as np
import pytest
from hypothesis import settings

from twinbench.data import Dataset

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(n=100, d=10, shift=1.0, seed=0):
    r = np.random.default_rng(seed)
    h = n // 2
    X = np.vstack([r.normal(shift, 1.0, (h, d)), r.normal(-shift, 1.0, (n - h, d))])
    return Dataset(X, np.r_[np.ones(h), -np.ones(n - h)])


@pytest.fixture
def separable():
    return blobs(60, 5, 2.0, seed=7)


# acceptance criteria report one line each; shown in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
