import math

import numpy as np
import pytest

from ctmcgap import GeneratorMatrix, build_three_state

# exact stationary law and gap of the bundled three-state chain
THREE_STATE_PI = np.array([1.0 / 3.0, 1.0 / 9.0, 5.0 / 9.0])
THREE_STATE_GAP = (15.0 - math.sqrt(15.0)) / 5.0

# its time reversal and additive reversibilization, worked out by hand
THREE_STATE_DUAL = np.array([
    [-2.0, 1.0 / 3.0, 5.0 / 3.0],
    [3.0, -3.0, 0.0],
    [3.0 / 5.0, 2.0 / 5.0, -1.0],
])
THREE_STATE_SYM = np.array([
    [-2.0, 2.0 / 3.0, 4.0 / 3.0],
    [2.0, -3.0, 1.0],
    [4.0 / 5.0, 1.0 / 5.0, -1.0],
])


@pytest.fixture
def three_state():
    return build_three_state()


@pytest.fixture
def two_state():
    # 0 -> 1 at rate 2, 1 -> 0 at rate 1; pi = (1/3, 2/3), gap = 3
    return GeneratorMatrix.from_rates(2, [(0, 1, 2.0), (1, 0, 1.0)])


def random_birth_death(rng, max_levels=30):
    """Random finite birth-death chain with log-uniform rates in [0.1, 10]."""
    n = int(rng.integers(1, max_levels + 1))
    a = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
    b = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
    return a, b
