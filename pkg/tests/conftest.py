import numpy as np
import pytest

from shadowlab.cocycle import LambdaTable


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table():
    return LambdaTable(0, [2.0, 1.0 / 3.0])
