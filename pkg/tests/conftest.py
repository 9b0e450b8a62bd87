import numpy as np
import pytest

from flowode import DiscreteMeasure, Schedule, gen_three_clusters, gen_two_point


@pytest.fixture(scope="session")
def three_clusters():
    return gen_three_clusters(7)


@pytest.fixture(scope="session")
def two_point():
    return gen_two_point()


@pytest.fixture(scope="session")
def rectified():
    return Schedule.rectified()


@pytest.fixture
def tiny_triangle():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return DiscreteMeasure(pts, np.full(3, 1.0 / 3.0))
