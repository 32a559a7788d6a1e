import numpy as np
import pytest

from vvlimit.constants import ModelParameters


@pytest.fixture
def p1_params():
    """gamma=2, delta=3 admissible set with iota = 1.8."""
    return ModelParameters(
        gamma=2.0, delta=3.0, alpha=1.0, beta=-0.6,
        pressure_coeff=1.0, epsilon=1e-2, kappa=1.0,
    )


@pytest.fixture
def p4_params():
    """gamma = delta = 2 set; P4 only, decay chain not certified."""
    return ModelParameters(
        gamma=2.0, delta=2.0, alpha=1.0, beta=0.0,
        pressure_coeff=1.0, epsilon=1e-2, kappa=1.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
