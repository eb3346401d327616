import numpy as np
import pytest

from manifold_zeros import matlin

# Lines collected by the acceptance suite, printed in the terminal summary.
ACCEPTANCE_LINES = []


def random_stiefel(rng, m, p):
    return matlin.qf(rng.standard_normal((m, p)))[0]


def random_spd(rng, m, lo=0.5, hi=2.0):
    Q = matlin.qf(rng.standard_normal((m, m)))[0]
    return matlin.sym((Q * rng.uniform(lo, hi, m)) @ Q.T)


def random_sym(rng, m):
    return matlin.sym(rng.standard_normal((m, m)))


def random_tangent(rng, X):
    Z = rng.standard_normal(X.shape)
    return Z - X @ matlin.sym(X.T @ Z)


def random_horizontal(rng, X):
    Z = rng.standard_normal(X.shape)
    return Z - X @ (X.T @ Z)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
