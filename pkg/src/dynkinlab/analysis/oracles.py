"""oracles.py

Independent reference values used to validate the solver and the game engine.
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

from ..errors import ArgumentError


def _crr(S0: float, T: float, sigma: float, mu: float, steps: int) -> Tuple[float, float, float, float]:
    if steps < 1 or sigma <= 0 or T <= 0 or S0 <= 0:
        raise ArgumentError("binomial tree needs steps >= 1 and positive S0, T and sigma")
    dt = T / steps
    up = np.exp(sigma * np.sqrt(dt))
    down = 1.0 / up
    p = (np.exp(mu * dt) - down) / (up - down)
    if not 0.0 < p < 1.0:
        raise ArgumentError(f"binomial probability {p:.4g} outside (0, 1); use more steps")
    return dt, up, down, p


def _backward(S0: float, K: float, T: float, sigma: float, mu: float, steps: int):
    """Yield ``(i, prices, continuation, values)`` from maturity back to the root."""
    dt, up, down, p = _crr(S0, T, sigma, mu, steps)
    j = np.arange(steps + 1)
    values = np.maximum(K - S0 * up ** (2 * j - steps), 0.0)
    for i in range(steps - 1, -1, -1):
        prices = S0 * up ** (2 * np.arange(i + 1) - i)
        cont = p * values[1:i + 2] + (1.0 - p) * values[:i + 1]
        values = np.maximum(cont, K - prices)
        yield i, prices, cont, values


def binomial_american_put(S0: float, K: float, T: float, sigma: float, mu: float = 0.0, steps: int = 2000) -> float:
    """CRR price of the American put on ``dS = mu S dt + sigma S dW`` without discounting.

    The tree probability matches the drift, ``p = (e^{mu dt} - d) / (u - d)``,
    so the value is the optimal stopping value of the undiscounted game.
    """
    values = None
    for _, _, _, values in _backward(S0, K, T, sigma, mu, steps):
        pass
    return float(values[0])


def binomial_exercise_boundary(S0: float, K: float, T: float, sigma: float, mu: float = 0.0,
                               steps: int = 2000) -> Tuple[np.ndarray, np.ndarray]:
    """Critical price per tree level: the largest node where exercising is optimal.

    Levels with no strictly profitable exercise node get ``nan``.
    """
    dt = T / steps
    times = np.arange(steps) * dt
    boundary = np.full(steps, np.nan)
    for i, prices, cont, _ in _backward(S0, K, T, sigma, mu, steps):
        exercise = K - prices
        stop = (exercise > 0) & (exercise >= cont)
        if stop.any():
            boundary[i] = float(np.max(prices[stop]))
    return times, boundary


def heat_cosine(t, x, T: float, sigma: float = 1.0):
    """``E[cos(x + sigma W_{T-t})] = exp(-sigma^2 (T - t) / 2) cos(x)``."""
    return np.exp(-0.5 * sigma ** 2 * (T - np.asarray(t, dtype=float))) * np.cos(x)


def gaussian_expectation(g: Callable[[np.ndarray], np.ndarray], x: float, sigma: float, tau: float,
                         n_nodes: int = 64, mu: float = 0.0) -> float:
    """``E[g(x + mu tau + sigma sqrt(tau) Z)]`` by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    pts = x + mu * tau + sigma * np.sqrt(tau) * nodes
    return float(np.sum(weights * np.asarray(g(pts), dtype=float)) / np.sqrt(2.0 * np.pi))
