import numpy as np
import pytest

from imblab import Curve


@pytest.fixture(scope="session")
def circle():
    return Curve.circle(1.0)


@pytest.fixture(scope="session")
def ellipse2():
    return Curve.ellipse(2.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260824)
