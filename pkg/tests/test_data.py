"""test_data.py

Problem builders shared by the test modules.

Each builder returns the ingredients of one reference case together with
the values the tests compare against.  Keeping them here keeps the test
modules free of setup noise and makes sure every module exercises the
same cases.
"""

import math

import numpy as np

from dynkinlab.core import obstacle
from dynkinlab.core.obstacle import UPPER_INFINITE, ObstacleProblem
from dynkinlab.core.sde import SdeModel, brownian, gbm
from dynkinlab.data.models import SpatialGrid, TimeGrid

TWO_PI = 2.0 * math.pi

# v(0, 0) = exp(-1/2) for the heat case
HEAT_VALUE_AT_ORIGIN = math.exp(-0.5)

# 2000-step CRR value of the driftless American put, S0 = K = 1, sigma = 0.2, T = 1
AMERICAN_PUT_VALUE = 0.0797


def heat_case(nodes: int = 400, steps: int = 400):
    """Brownian motion, g = cos, obstacles never active."""
    model = brownian(1, sigma=1.0, growth_bound=1.0)
    problem = ObstacleProblem(1.0, 1, obstacle.constant(-10.0), obstacle.constant(10.0), obstacle.cosine(),
                              bounds=(-10.0, 10.0))
    grid = SpatialGrid.box([-TWO_PI], [TWO_PI], [nodes], "neumann_zero")
    return model, problem, grid, TimeGrid.uniform(0.0, 1.0, steps)


def american_put_case(nodes: int = 401, steps: int = 400, mu: float = 0.0):
    """Single-obstacle put under GBM on [0, 4]."""
    model = gbm(1, mu=mu, sigma=0.2)
    payoff = obstacle.put(1.0)
    problem = ObstacleProblem(1.0, 1, payoff, UPPER_INFINITE, payoff, bounds=(0.0, 1.0))
    grid = SpatialGrid.box([0.0], [4.0], [nodes])
    return model, problem, grid, TimeGrid.uniform(0.0, 1.0, steps)


def symmetric_game(nodes: int = 121, steps: int = 100):
    """l = -0.5 - min(x^2, 1), u = -l, g = 0; the value is identically zero."""
    model = brownian(1, sigma=1.0)
    lower = obstacle.capped_quadratic(-0.5, -1.0, 1.0)
    upper = obstacle.capped_quadratic(0.5, 1.0, 1.0)
    problem = ObstacleProblem(1.0, 1, lower, upper, obstacle.constant(0.0), bounds=(-1.5, 1.5))
    grid = SpatialGrid.box([-3.0], [3.0], [nodes])
    return model, problem, grid, TimeGrid.uniform(0.0, 1.0, steps)


def tanh_game(nodes: int = 161, steps: int = 100, width: float = 0.1):
    """g = tanh, l = g - width, u = g + width: both stopping regions are nonempty."""
    model = brownian(1, sigma=1.0)
    problem = ObstacleProblem(1.0, 1, obstacle.tanh(offset=-width), obstacle.tanh(offset=width), obstacle.tanh(),
                              bounds=(-1.0 - width, 1.0 + width))
    grid = SpatialGrid.box([-4.0], [4.0], [nodes])
    return model, problem, grid, TimeGrid.uniform(0.0, 1.0, steps)


def drift_only_case():
    """b = 1, sigma = 0, l = g = max(1 - x, 0) on [-1, 2]; optimal stopping for the maximizer."""
    model = brownian(1, sigma=0.0, mu=1.0)
    payoff = obstacle.put(1.0)
    problem = ObstacleProblem(1.0, 1, payoff, UPPER_INFINITE, payoff, bounds=(0.0, 2.0))
    box = ([-1.0], [2.0])
    return model, problem, box


def explicit_case(nodes: int = 41, steps: int = 200):
    """Small Brownian game whose explicit scheme satisfies the CFL bound."""
    model = brownian(1, sigma=1.0, mu=0.3)
    problem = ObstacleProblem(1.0, 1, obstacle.gaussian_bump(0.5, 0.0, 0.5, offset=-0.8),
                              obstacle.gaussian_bump(-0.5, 0.5, 0.4, offset=0.6), obstacle.tanh(0.2))
    grid = SpatialGrid.box([-2.0], [2.0], [nodes])
    return model, problem, grid, TimeGrid.uniform(0.0, 1.0, steps)


def correlated_2d_case(nodes: int = 21, steps: int = 20):
    """Two correlated Brownian coordinates with a call-like lower obstacle."""
    vol = np.array([[1.0, 0.0], [0.4, 0.9]])
    model = SdeModel("correlated", 2, 2, lambda t, x: np.array([0.1, -0.1]), lambda t, x: vol)
    problem = ObstacleProblem(0.5, 2, obstacle.affine([0.3, 0.2], -0.5), obstacle.constant(2.0),
                              obstacle.gaussian_bump(0.5, [0.0, 0.0], 0.7, offset=0.3))
    grid = SpatialGrid.box([-1.5, -1.5], [1.5, 1.5], [nodes, nodes])
    return model, problem, grid, TimeGrid.uniform(0.0, 0.5, steps)
