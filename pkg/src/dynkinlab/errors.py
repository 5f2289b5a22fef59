"""errors.py

Exception hierarchy shared by every dynkinlab module.

Anything a caller may want to catch as a group derives from
``DynkinLabError``.  Each class also derives from the builtin it
specialises (``ValueError`` for bad input, ``RuntimeError`` for failures
discovered while computing) so code written against the builtins keeps
working.
"""

from __future__ import annotations

from typing import Optional, Sequence


class DynkinLabError(Exception):
    """Base class for all dynkinlab errors."""


class ArgumentError(DynkinLabError, ValueError):
    """An argument is outside the domain of the operation."""


class ConfigError(DynkinLabError, ValueError):
    """A run configuration could not be parsed or validated."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class SimulationError(DynkinLabError, RuntimeError):
    """A coefficient or state became non-finite during path generation."""

    def __init__(self, message: str, t: float, x: Sequence[float]):
        self.t = float(t)
        self.x = tuple(float(c) for c in x)
        super().__init__(f"{message} at t={self.t:.6g}, x={self.x}")


class ObstacleOrderError(DynkinLabError, ValueError):
    """The standing assumptions l <= u and l(T) <= g <= u(T) fail somewhere."""

    def __init__(self, message: str, t: float, x: Sequence[float]):
        self.t = float(t)
        self.x = tuple(float(c) for c in x)
        super().__init__(f"{message} at t={self.t:.6g}, x={self.x}")


class SchemeError(DynkinLabError, ValueError):
    """The finite-difference stencil is not monotone on the requested grid."""


class CflError(SchemeError):
    """Explicit time step exceeds the monotonicity (CFL) bound."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = float(dt)
        self.dt_max = float(dt_max)
        super().__init__(
            f"CFL condition violated: dt={self.dt:.6g} exceeds dt_max={self.dt_max:.6g}; "
            "refine the time grid or use scheme='implicit_psor'"
        )


class ConvergenceError(DynkinLabError, RuntimeError):
    """Projected SOR did not reach its tolerance within max_iter sweeps."""

    def __init__(self, residual: float, iterations: int, step: int):
        self.residual = float(residual)
        self.iterations = int(iterations)
        self.step = int(step)
        super().__init__(
            f"PSOR did not converge at time step {self.step} after {self.iterations} sweeps "
            f"(last max update {self.residual:.3e})"
        )


class RegionOverlapError(DynkinLabError, RuntimeError):
    """Upper and lower stopping regions overlap where the obstacles are apart."""


class GameError(DynkinLabError, RuntimeError):
    """A payoff was requested that the game mode does not allow."""
