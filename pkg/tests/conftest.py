import numpy as np
import pytest

from godds.dgp import tilt_to_outcome_rate, worked_example
from godds.harness import het3_dgp


@pytest.fixture(scope="session")
def we_dgp():
    return worked_example()


@pytest.fixture(scope="session")
def we_qlaw(we_dgp):
    return tilt_to_outcome_rate(we_dgp, 0.5)


@pytest.fixture(scope="session")
def het3():
    return het3_dgp()


@pytest.fixture(scope="session")
def het3_qlaw(het3):
    return tilt_to_outcome_rate(het3, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
