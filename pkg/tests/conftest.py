import numpy as np
import pytest

from basincert import CompactDomain, PointSet, BallSet, WholeDomain


@pytest.fixture
def box2():
    return CompactDomain.box([[-1.0, 1.0], [-1.0, 1.0]])


@pytest.fixture
def origin_target(box2):
    return PointSet(box2, [[0.0, 0.0]])


@pytest.fixture
def unit_ball(box2):
    return BallSet(box2, [[0.0, 0.0]], 1.0, open_flag=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
