from fractions import Fraction

import numpy as np
import pytest

from flexsched import _kernels
from flexsched.model import CostModel, Instance, Job, ShapeKind

BACKENDS = _kernels.available()


def cycle_instance() -> Instance:
    jobs = [Job.rectangular(j, 1.0, 1, 1, 3) for j in range(4)]
    return Instance(3, jobs, CostModel.quadratic_pure())


def cycle_schedule() -> np.ndarray:
    return np.array([
        [3 / 8, 5 / 8, 0.0],
        [0.0, 1 / 4, 3 / 4],
        [1 / 2, 1 / 8, 3 / 8],
        [0.0, 1.0, 0.0],
    ])


def shapes_instance() -> Instance:
    shapes = [[1.0], [1.0, 2.0], [1.0, 3.0], [2.0, 3.0]]
    jobs = [Job(j, np.array(s), 1, 4, ShapeKind.REALISTIC) for j, s in enumerate(shapes)]
    return Instance(4, jobs, CostModel.quadratic_pure())


def shapes_schedule() -> np.ndarray:
    return np.array([
        [1 / 8, 0.0, 5 / 8, 1 / 4],
        [3 / 5, 0.0, 2 / 5, 0.0],
        [1 / 4, 1 / 2, 1 / 4, 0.0],
        [2 / 5, 0.0, 3 / 5, 0.0],
    ])


SHAPES_UPDATED = [
    [Fraction(1, 4), 0, Fraction(1, 2), Fraction(1, 4)],
    [Fraction(9, 40), 0, Fraction(31, 40), 0],
    [Fraction(1, 2), Fraction(1, 2), 0, 0],
    [Fraction(2, 5), 0, Fraction(3, 5), 0],
]


@pytest.fixture
def cycle_example():
    return cycle_instance(), cycle_schedule()


@pytest.fixture
def shapes_example():
    return shapes_instance(), shapes_schedule()


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return _kernels.load(request.param)
