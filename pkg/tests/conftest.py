import numpy as np
import pytest

import fracbubble as fb


@pytest.fixture(scope="session")
def params():
    """Default supercritical configuration."""
    return fb.validate(1, 0.2, 1.5, 0.01)


@pytest.fixture(scope="session")
def params_sub():
    """Sublinear exponent (below the 2s/(n-2s) threshold)."""
    return fb.validate(1, 0.2, 0.5)


@pytest.fixture(scope="session")
def params2d():
    return fb.validate(2, 0.2, 1.0)


@pytest.fixture(scope="session")
def weight():
    return fb.CompactWeight((fb.Bump((0.0,), 1.0, 1.0, 2),))


@pytest.fixture(scope="session")
def weight_pm():
    """Sign-changing pair with centers 6 apart."""
    return fb.CompactWeight((fb.Bump((-3.0,), 1.0, 1.0, 2),
                             fb.Bump((3.0,), 1.0, -1.0, 2)))


@pytest.fixture(scope="session")
def grid():
    return fb.Grid(1, 40.0, 4096)


@pytest.fixture(scope="session")
def grid_mid():
    return fb.Grid(1, 40.0, 1024)


@pytest.fixture(scope="session")
def grid2d():
    return fb.Grid(2, 20.0, 256)


@pytest.fixture(scope="session")
def bubble1(params):
    return fb.BubblePoint.at(params, 1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7041)
