import numpy as np
import pytest

from funkernel import Covariates, Grid, KernelConfig, TrainingSet, uniform_grid


def random_problem(rng, n, m, p=1, k=2, ms=11, nonuniform=False):
    """Random training set with smooth-ish covariates and responses."""
    grids = []
    for _ in range(p):
        if nonuniform:
            pts = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, ms - 2)]))
            grids.append(Grid(pts))
        else:
            grids.append(uniform_grid(0.0, 1.0, ms))
    xc = tuple(rng.normal(size=(n, len(g))) for g in grids)
    xd = rng.normal(size=(n, k))
    X = Covariates([f"s{i:03d}" for i in range(n)], xd, xc, tuple(grids))
    tg = uniform_grid(0.0, 1.0, m)
    return TrainingSet(X, rng.normal(size=(n, m)), tg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def kernel():
    return KernelConfig(sigma_d=1.0, functional="gaussian", sigma_c=2.0, sigma_y=0.3)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the terminal summary")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
