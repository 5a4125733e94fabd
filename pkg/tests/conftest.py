import numpy as np
import pytest

from spikecrown.ground_state import shoot
from spikecrown.nonlinearity import Nonlinearity


@pytest.fixture(scope="session")
def profile_p3n1():
    return shoot(Nonlinearity(p=3.0, dim_n=1))


@pytest.fixture(scope="session")
def profile_p4n1():
    return shoot(Nonlinearity(p=4.0, dim_n=1))


@pytest.fixture(scope="session")
def profile_p3n2():
    return shoot(Nonlinearity(p=3.0, dim_n=2))


@pytest.fixture(scope="session")
def profile_p4n2():
    return shoot(Nonlinearity(p=4.0, dim_n=2))


def closed_form_1d(p, r):
    """Exact decaying profile in one dimension for any p > 2."""
    r = np.asarray(r, dtype=float)
    return (p / 2.0) ** (1.0 / (p - 2.0)) * np.cosh((p - 2.0) * r / 2.0) ** (
        -2.0 / (p - 2.0)
    )
