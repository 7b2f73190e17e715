import numpy as np
import pytest

from roadtopo import RoadGraph

from .builders import ladder


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def ladder_graph() -> RoadGraph:
    return ladder()


@pytest.fixture
def broken_ladder() -> RoadGraph:
    return ladder(without=(1, 4))
