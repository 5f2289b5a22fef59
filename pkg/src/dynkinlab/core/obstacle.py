"""obstacle.py

Game data of the double obstacle problem and the operators built on it.

An ``ObstacleProblem`` bundles the lower obstacle ``l``, the upper obstacle
``u`` (or the ``UPPER_INFINITE`` sentinel for optimal stopping) and the
terminal payoff ``g``.  The module also evaluates the generator

    L_t phi = <b, grad phi> + 1/2 Tr(sigma sigma^T D^2 phi)

and the Isaacs operator in both of its equivalent forms

    max{v - u, min{-v_t - L_t v, v - l}} = min{v - l, max{-v_t - L_t v, v - u}},

the equality holding whenever ``l <= u``.  All functions here are pure and
may be called from any number of threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..data.models import JetPoint, as_points
from ..errors import ArgumentError, ObstacleOrderError
from .sde import SdeModel

logger = logging.getLogger(__name__)

FIELD_KINDS = ("constant", "affine", "put", "call", "gaussian_bump", "cosine", "tanh",
               "capped_quadratic", "tabulated")


@dataclass(frozen=True)
class Field:
    """A real function of ``(t, x)`` evaluated on arrays of points ``(..., d)``."""

    kind: str
    fn: Callable[[float, np.ndarray], Any] = field(repr=False, compare=False)
    params: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(t, x), dtype=float), x.shape[:-1])

    def __neg__(self) -> "Field":
        return Field(f"-{self.kind}", lambda t, x: -self(t, x), {"negated": self.params})

    def __add__(self, other: Union["Field", float]) -> "Field":
        if isinstance(other, Field):
            return Field(f"{self.kind}+{other.kind}", lambda t, x: self(t, x) + other(t, x))
        c = float(other)
        return Field(f"{self.kind}+const", lambda t, x: self(t, x) + c, {"shift": c})

    @classmethod
    def custom(cls, fn: Callable[[float, np.ndarray], Any], kind: str = "custom") -> "Field":
        return cls(kind, fn)


class _Unbounded:
    """Sentinel for the upper obstacle ``u = +inf`` (optimal stopping)."""

    _instance: Optional["_Unbounded"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UPPER_INFINITE"


UPPER_INFINITE = _Unbounded()


def constant(value: float) -> Field:
    c = float(value)
    return Field("constant", lambda t, x: np.full(x.shape[:-1], c), {"value": c})


def affine(slope: float | Sequence[float], intercept: float = 0.0) -> Field:
    a = np.atleast_1d(np.asarray(slope, dtype=float))
    return Field("affine", lambda t, x: intercept + x @ a, {"slope": a.tolist(), "intercept": intercept})


def put(strike: float, axis: int = 0) -> Field:
    return Field("put", lambda t, x: np.maximum(strike - x[..., axis], 0.0), {"strike": strike, "axis": axis})


def call(strike: float, axis: int = 0) -> Field:
    return Field("call", lambda t, x: np.maximum(x[..., axis] - strike, 0.0), {"strike": strike, "axis": axis})


def gaussian_bump(height: float = 1.0, center: float | Sequence[float] = 0.0, width: float = 1.0,
                  offset: float = 0.0) -> Field:
    c = np.atleast_1d(np.asarray(center, dtype=float))

    def _bump(t, x):
        r2 = np.sum((x - c) ** 2, axis=-1)
        return offset + height * np.exp(-0.5 * r2 / width ** 2)

    return Field("gaussian_bump", _bump, {"height": height, "center": c.tolist(), "width": width, "offset": offset})


def cosine(amplitude: float = 1.0, frequency: float = 1.0, axis: int = 0, offset: float = 0.0) -> Field:
    return Field("cosine", lambda t, x: offset + amplitude * np.cos(frequency * x[..., axis]),
                 {"amplitude": amplitude, "frequency": frequency, "axis": axis, "offset": offset})


def tanh(amplitude: float = 1.0, scale: float = 1.0, axis: int = 0, offset: float = 0.0) -> Field:
    return Field("tanh", lambda t, x: offset + amplitude * np.tanh(scale * x[..., axis]),
                 {"amplitude": amplitude, "scale": scale, "axis": axis, "offset": offset})


def capped_quadratic(offset: float = 0.0, scale: float = 1.0, cap: float = 1.0) -> Field:
    """``offset + scale * min(|x|^2, cap)``."""
    return Field("capped_quadratic", lambda t, x: offset + scale * np.minimum(np.sum(x * x, axis=-1), cap),
                 {"offset": offset, "scale": scale, "cap": cap})


def tabulated(axes: Sequence[Sequence[float]], values: Any, times: Optional[Sequence[float]] = None) -> Field:
    """Multilinear interpolation of tabulated values; points outside are clamped.

    ``values`` has shape ``(len(axes[0]), ...)`` or, when ``times`` is given,
    ``(len(times), len(axes[0]), ...)``.
    """
    coords = [np.asarray(a, dtype=float) for a in axes]
    vals = np.asarray(values, dtype=float)
    lo = np.array([c[0] for c in coords])
    hi = np.array([c[-1] for c in coords])
    if times is None:
        interp = RegularGridInterpolator(tuple(coords), vals, method="linear")

        def _tab(t, x):
            flat = np.clip(x.reshape(-1, len(coords)), lo, hi)
            return interp(flat).reshape(x.shape[:-1])
    else:
        tnodes = np.asarray(times, dtype=float)
        interp = RegularGridInterpolator((tnodes, *coords), vals, method="linear")

        def _tab(t, x):
            flat = np.clip(x.reshape(-1, len(coords)), lo, hi)
            tt = np.full((flat.shape[0], 1), np.clip(t, tnodes[0], tnodes[-1]))
            return interp(np.hstack([tt, flat])).reshape(x.shape[:-1])

    return Field("tabulated", _tab, {"axes": [c.tolist() for c in coords], "timed": times is not None})


def field_from_spec(spec: Any) -> Field:
    """Build a field from a number or a ``{"kind": ..., **params}`` mapping."""
    if isinstance(spec, (int, float)):
        return constant(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ArgumentError(f"field spec must be a number or a table with 'kind', got {spec!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    builders = {"constant": constant, "affine": affine, "put": put, "call": call,
                "gaussian_bump": gaussian_bump, "cosine": cosine, "tanh": tanh,
                "capped_quadratic": capped_quadratic, "tabulated": tabulated}
    kind = spec["kind"]
    if kind not in builders:
        raise ArgumentError(f"unknown field kind {kind!r}; choose one of {', '.join(FIELD_KINDS)}")
    try:
        return builders[kind](**params)
    except TypeError as e:
        raise ArgumentError(f"bad parameters for field {kind!r}: {e}") from e


@dataclass(frozen=True)
class ObstacleProblem:
    """Horizon, obstacles ``l <= u`` and terminal payoff ``g`` of a Dynkin game.

    With ``upper = UPPER_INFINITE`` the problem is the optimal stopping
    problem of the maximizer alone: every term involving ``v - u`` drops out
    and the minimizer never stops before the horizon.
    """

    horizon: float
    dim: int
    lower: Field
    upper: Union[Field, _Unbounded]
    terminal: Field
    bounds: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ArgumentError("horizon must be positive")
        if self.bounds is not None and not self.bounds[0] <= self.bounds[1]:
            raise ArgumentError(f"bounds must satisfy m <= M, got {self.bounds}")

    @property
    def single_obstacle(self) -> bool:
        return self.upper is UPPER_INFINITE

    def lower_at(self, t: float, x: Any) -> np.ndarray:
        return self.lower(t, as_points(x, self.dim))

    def upper_at(self, t: float, x: Any) -> np.ndarray:
        pts = as_points(x, self.dim)
        if self.single_obstacle:
            return np.full(pts.shape[:-1], np.inf)
        return self.upper(t, pts)

    def terminal_at(self, x: Any) -> np.ndarray:
        return self.terminal(self.horizon, as_points(x, self.dim))

    def check_on_grid(self, times: Sequence[float], points: np.ndarray) -> None:
        """Raise ``ObstacleOrderError`` unless ``l <= u`` and ``l(T) <= g <= u(T)`` on the grid."""
        pts = as_points(points, self.dim).reshape(-1, self.dim)
        for t in np.asarray(times, dtype=float):
            lo, hi = self.lower_at(t, pts), self.upper_at(t, pts)
            bad = lo > hi
            if bad.any():
                i = int(np.argmax(bad))
                raise ObstacleOrderError(f"lower obstacle {lo[i]:.6g} exceeds upper {hi[i]:.6g}", t, pts[i])
        lo_T, hi_T = self.lower_at(self.horizon, pts), self.upper_at(self.horizon, pts)
        g = self.terminal_at(pts)
        bad = (g < lo_T) | (g > hi_T)
        if bad.any():
            i = int(np.argmax(bad))
            raise ObstacleOrderError(
                f"terminal payoff {g[i]:.6g} outside [{lo_T[i]:.6g}, {hi_T[i]:.6g}]", self.horizon, pts[i])

    def verify_bounds(self, times: Sequence[float], points: np.ndarray) -> None:
        """Check the declared bounds ``m <= l, u, g <= M`` (finite values only)."""
        if self.bounds is None:
            return
        m, M = self.bounds
        pts = as_points(points, self.dim).reshape(-1, self.dim)
        samples = [(self.horizon, self.terminal_at(pts), "terminal payoff")]
        for t in np.asarray(times, dtype=float):
            samples.append((t, self.lower_at(t, pts), "lower obstacle"))
            if not self.single_obstacle:
                samples.append((t, self.upper_at(t, pts), "upper obstacle"))
        for t, vals, what in samples:
            bad = (vals < m) | (vals > M)
            if bad.any():
                i = int(np.argmax(bad))
                raise ObstacleOrderError(f"{what} {vals[i]:.6g} outside declared bounds [{m}, {M}]", t, pts[i])

    def swapped(self) -> "ObstacleProblem":
        """Player-swap dual ``(g, l, u) -> (-g, -u, -l)``."""
        if self.single_obstacle:
            raise ArgumentError("player swap needs a finite upper obstacle")
        bounds = None if self.bounds is None else (-self.bounds[1], -self.bounds[0])
        return ObstacleProblem(self.horizon, self.dim, -self.upper, -self.lower, -self.terminal, bounds)


def problem_from_specs(horizon: float, dim: int, lower: Any, upper: Any, terminal: Any,
                       mode: str = "double", bounds: Optional[Sequence[float]] = None) -> ObstacleProblem:
    """Assemble a problem from field specs; ``upper = "inf"`` or ``mode = "single"`` selects optimal stopping."""
    if mode not in ("single", "double"):
        raise ArgumentError(f"mode must be 'single' or 'double', got {mode!r}")
    unbounded = mode == "single" or (isinstance(upper, str) and upper.lower() in ("inf", "+inf"))
    if mode == "double" and unbounded:
        raise ArgumentError("double-obstacle mode needs a finite upper obstacle")
    up = UPPER_INFINITE if unbounded else field_from_spec(upper)
    return ObstacleProblem(float(horizon), int(dim), field_from_spec(lower), up, field_from_spec(terminal),
                           None if bounds is None else (float(bounds[0]), float(bounds[1])))


def generator_apply(model: SdeModel, jet: JetPoint) -> float:
    """``<b(t,x), grad> + 1/2 Tr(sigma sigma^T hess)`` at the jet's point."""
    if jet.dim != model.dim:
        raise ArgumentError(f"jet dimension {jet.dim} does not match model dimension {model.dim}")
    b = model.drift_at(jet.t, jet.x)[0]
    a = model.covariance_at(jet.t, jet.x)[0]
    return float(b @ jet.grad + 0.5 * np.trace(a @ jet.hess))


def isaacs_max_min(v: Any, pde_term: Any, lower: Any, upper: Any) -> np.ndarray:
    """``max{v - u, min{pde_term, v - l}}`` elementwise; ``pde_term = -v_t - L_t v``."""
    v = np.asarray(v, dtype=float)
    return np.maximum(v - upper, np.minimum(pde_term, v - lower))


def isaacs_min_max(v: Any, pde_term: Any, lower: Any, upper: Any) -> np.ndarray:
    """``min{v - l, max{pde_term, v - u}}`` elementwise."""
    v = np.asarray(v, dtype=float)
    return np.minimum(v - lower, np.maximum(pde_term, v - upper))


def _jet_terms(model: SdeModel, problem: ObstacleProblem, jet: JetPoint) -> Tuple[float, float, float]:
    if jet.dim != problem.dim:
        raise ArgumentError(f"jet dimension {jet.dim} does not match problem dimension {problem.dim}")
    if not jet.t < problem.horizon:
        raise ArgumentError(f"Isaacs residual is defined for t < T, got t={jet.t}")
    pde_term = -jet.v_t - generator_apply(model, jet)
    lo = float(problem.lower_at(jet.t, jet.x[None, :])[0])
    hi = float(problem.upper_at(jet.t, jet.x[None, :])[0])
    return pde_term, lo, hi


def isaacs_residual(model: SdeModel, problem: ObstacleProblem, jet: JetPoint) -> float:
    """Max-min form of the Isaacs operator at a jet (single obstacle: ``min{-v_t - L v, v - l}``)."""
    pde_term, lo, hi = _jet_terms(model, problem, jet)
    if problem.single_obstacle:
        return float(min(pde_term, jet.v - lo))
    return float(isaacs_max_min(jet.v, pde_term, lo, hi))


def isaacs_dual_residual(model: SdeModel, problem: ObstacleProblem, jet: JetPoint) -> float:
    """Min-max form of the Isaacs operator at a jet."""
    pde_term, lo, hi = _jet_terms(model, problem, jet)
    if problem.single_obstacle:
        return float(min(jet.v - lo, pde_term))
    return float(isaacs_min_max(jet.v, pde_term, lo, hi))
