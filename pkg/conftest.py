import numpy as np
import pytest

import Models.Potentials
import Models.CriticalPoints
import Models.HeatFlow


@pytest.fixture
def rng():
    return np.random.default_rng(1337)


@pytest.fixture(scope="session")
def pendulum_1d():
    '''
    Pendulum potential of class 1 on the circle with its two critical points, x^(0) first
    '''
    V = Models.Potentials.pendulum_potential((1,))
    points = Models.CriticalPoints.enumerate_critical(V, (1,), N=128, workers=1)
    return V, points


@pytest.fixture(scope="session")
def pendulum_lines_1d(pendulum_1d):
    V, points = pendulum_1d
    return V, points, Models.HeatFlow.trace_all_lines(points, V, workers=1)
