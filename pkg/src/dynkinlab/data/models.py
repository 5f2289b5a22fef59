"""models.py

Centralized data models for the Dynkin-game laboratory.
Contains the dataclasses shared by the simulation, solver, game and
martingale modules: time and space grids, jets, path ensembles, grid
functions, stopping regions and the report records every check returns.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import ArgumentError

BOUNDARY_POLICIES = ("dirichlet_from_payoff", "neumann_zero")
MAX_GRID_DIM = 3


def as_points(x: Any, dim: int) -> np.ndarray:
    """Return ``x`` as a float array whose last axis has length ``dim``.

    In one dimension bare scalars and 1-D arrays of positions are accepted
    and get a trailing axis.
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise ArgumentError(f"expected points with trailing dimension {dim}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time nodes ``s = t_0 < ... < t_N = T``."""

    s: float
    T: float
    n_steps: int
    nodes: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if self.n_steps < 1:
            raise ArgumentError("n_steps must be positive")
        if nodes.shape != (self.n_steps + 1,):
            raise ArgumentError(f"expected {self.n_steps + 1} time nodes, got {nodes.shape}")
        if not np.all(np.diff(nodes) > 0):
            raise ArgumentError("time nodes must be strictly increasing")
        if nodes[0] != self.s or nodes[-1] != self.T:
            raise ArgumentError("time nodes must start at s and end at T exactly")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, s: float, T: float, n_steps: int) -> "TimeGrid":
        if not T > s:
            raise ArgumentError(f"horizon T={T} must exceed start s={s}")
        if n_steps < 1:
            raise ArgumentError("n_steps must be positive")
        return cls(float(s), float(T), int(n_steps), np.linspace(float(s), float(T), int(n_steps) + 1))

    @classmethod
    def from_nodes(cls, nodes: Sequence[float]) -> "TimeGrid":
        nodes = np.asarray(nodes, dtype=float)
        return cls(float(nodes[0]), float(nodes[-1]), len(nodes) - 1, nodes)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.nodes)

    def tail(self, k: int) -> "TimeGrid":
        """Sub-grid made of nodes ``k..N`` (needs at least one step left)."""
        if not 0 <= k < self.n_steps:
            raise ArgumentError(f"tail index {k} outside [0, {self.n_steps})")
        return TimeGrid.from_nodes(self.nodes[k:])

    def index_at_or_after(self, t: float) -> int:
        """First node index with ``t_k >= t`` (N when t is past the horizon)."""
        tol = 1e-12 * max(1.0, abs(self.T))
        k = int(np.searchsorted(self.nodes, t - tol, side="left"))
        return min(k, self.n_steps)

    def index_left(self, t: Any) -> np.ndarray:
        """Index of the last node ``<= t`` (piecewise-constant-left lookup)."""
        tol = 1e-9 * max(1.0, self.T - self.s)
        k = np.searchsorted(self.nodes, np.asarray(t, dtype=float) + tol, side="right") - 1
        return np.clip(k, 0, self.n_steps)


@dataclass(frozen=True)
class Axis:
    """Uniform node array on ``[lo, hi]``."""

    lo: float
    hi: float
    n_nodes: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ArgumentError(f"axis bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if self.n_nodes < 3:
            raise ArgumentError(f"each axis needs at least 3 nodes, got {self.n_nodes}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_nodes)

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n_nodes - 1)


@dataclass(frozen=True)
class SpatialGrid:
    """Tensor grid over a box in R^d (d <= 3), flattened in C order."""

    axes: Tuple[Axis, ...]
    boundary_policy: str = "dirichlet_from_payoff"

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= MAX_GRID_DIM:
            raise ArgumentError(f"grids support 1 to {MAX_GRID_DIM} dimensions, got {len(self.axes)}")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ArgumentError(f"unknown boundary policy {self.boundary_policy!r}")

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float], n_nodes: Sequence[int],
            boundary_policy: str = "dirichlet_from_payoff") -> "SpatialGrid":
        lo, hi, n_nodes = np.atleast_1d(lo), np.atleast_1d(hi), np.atleast_1d(n_nodes)
        if not len(lo) == len(hi) == len(n_nodes):
            raise ArgumentError("lo, hi and n_nodes must have one entry per axis")
        axes = tuple(Axis(float(a), float(b), int(n)) for a, b, n in zip(lo, hi, n_nodes))
        return cls(axes, boundary_policy)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.n_nodes for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def coords(self) -> List[np.ndarray]:
        return [a.nodes for a in self.axes]

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a.h for a in self.axes])

    @property
    def lo(self) -> np.ndarray:
        return np.array([a.lo for a in self.axes])

    @property
    def hi(self) -> np.ndarray:
        return np.array([a.hi for a in self.axes])

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``."""
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def multi_index(self) -> np.ndarray:
        """Integer node indices per axis, shape ``(size, dim)``."""
        return np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=-1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        idx = self.multi_index
        upper = np.array(self.shape) - 1
        return np.any((idx == 0) | (idx == upper), axis=1)

    def interior_mask(self, margin: float = 0.0) -> np.ndarray:
        """Nodes at least ``margin`` (fraction of each side length) inside the box."""
        width = self.hi - self.lo
        lo = self.lo + margin * width
        hi = self.hi - margin * width
        inside = np.all((self.points >= lo - 1e-12) & (self.points <= hi + 1e-12), axis=1)
        return inside & ~self.boundary_mask

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)


@dataclass(frozen=True)
class JetPoint:
    """Arguments ``(t, x, v, v_t, grad, hess)`` of the Isaacs operator."""

    t: float
    x: np.ndarray
    v: float
    v_t: float
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        grad = np.atleast_1d(np.asarray(self.grad, dtype=float))
        hess = np.atleast_2d(np.asarray(self.hess, dtype=float))
        d = x.shape[0]
        if grad.shape != (d,) or hess.shape != (d, d):
            raise ArgumentError(f"jet shapes disagree: x {x.shape}, grad {grad.shape}, hess {hess.shape}")
        scale = max(1.0, float(np.max(np.abs(hess))))
        if np.max(np.abs(hess - hess.T)) > 1e-12 * scale:
            raise ArgumentError("hessian must be symmetric")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", hess)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def negated(self) -> "JetPoint":
        return JetPoint(self.t, self.x, -self.v, -self.v_t, -self.grad, -self.hess)


@dataclass(frozen=True)
class PathBundle:
    """Seeded ensemble of discrete-time trajectories, ``states[p, k, :]``."""

    model_id: str
    grid: TimeGrid
    n_paths: int
    seed: int
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.states.shape[-1]

    @property
    def initial(self) -> np.ndarray:
        return self.states[0, 0]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1, :]


@dataclass
class GridFunction:
    """Values of a candidate solution on a space-time tensor grid.

    Interpolation is multilinear in space (points outside the box are
    clamped onto it) and piecewise-constant-left in time.
    """

    grid: SpatialGrid
    times: TimeGrid
    values: np.ndarray
    scheme: str = "implicit_psor"
    _interpolators: Dict[int, RegularGridInterpolator] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.times.n_steps + 1, self.grid.size)
        if self.values.shape != expected:
            raise ArgumentError(f"grid function values must have shape {expected}, got {self.values.shape}")

    def surface(self, k: int) -> np.ndarray:
        """Values at time node ``k`` reshaped to the spatial grid."""
        return self.values[k].reshape(self.grid.shape)

    def _interpolator(self, k: int) -> RegularGridInterpolator:
        interp = self._interpolators.get(k)
        if interp is None:
            interp = RegularGridInterpolator(tuple(self.grid.coords), self.surface(k), method="linear")
            self._interpolators[k] = interp
        return interp

    def evaluate(self, t: float, x: Any) -> np.ndarray:
        """Interpolate at a single time ``t`` and points ``x`` (shape ``(..., d)``)."""
        pts = as_points(x, self.grid.dim)
        k = int(self.times.index_left(t))
        flat = self.grid.clip(pts.reshape(-1, self.grid.dim))
        return self._interpolator(k)(flat).reshape(pts.shape[:-1])

    def evaluate_many(self, t: np.ndarray, x: Any) -> np.ndarray:
        """Interpolate at per-point times ``t`` (shape ``(n,)``) and points ``(n, d)``."""
        pts = as_points(x, self.grid.dim).reshape(-1, self.grid.dim)
        ks = self.times.index_left(np.asarray(t, dtype=float).reshape(-1))
        out = np.empty(len(pts))
        flat = self.grid.clip(pts)
        for k in np.unique(ks):
            sel = ks == k
            out[sel] = self._interpolator(int(k))(flat[sel])
        return out

    def value_at(self, s: float, x: Sequence[float]) -> float:
        pts = np.asarray(x, dtype=float).reshape(1, self.grid.dim)
        return float(self.evaluate(s, pts)[0])

    def negated(self) -> "GridFunction":
        return GridFunction(self.grid, self.times, -self.values, self.scheme)


@dataclass(frozen=True)
class StoppingRegions:
    """Contact sets ``{v >= u - eps}`` (minimizer) and ``{v <= l + eps}`` (maximizer)."""

    upper_mask: np.ndarray = field(repr=False)
    lower_mask: np.ndarray = field(repr=False)
    tolerance: float

    @property
    def upper_empty(self) -> bool:
        return not bool(np.any(self.upper_mask))

    @property
    def lower_empty(self) -> bool:
        return not bool(np.any(self.lower_mask))


@dataclass(frozen=True)
class GameEstimate:
    """Monte Carlo estimate of the payoff J for one strategy pair."""

    mean: float
    std_error: float
    n_paths: int
    breakdown: Dict[str, float]
    mean_tau_time: float = float("nan")
    mean_rho_time: float = float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class GrowthReport:
    """Largest observed ``(|b| + |sigma|) / (C (1 + |x|))`` over a sampled box."""

    max_ratio: float
    witness: Tuple[float, ...]
    witness_time: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass(frozen=True)
class ComplementarityReport:
    """Worst violations of the discrete Isaacs complementarity conditions."""

    max_interior_residual: float
    region_sign_violations: int
    worst_nodes: List[Dict[str, Any]]
    tol_pde: float
    contact_eps: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.region_sign_violations == 0 and self.max_interior_residual <= self.tol_pde

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass(frozen=True)
class ChallengerResult:
    """One unilateral deviation tested in a saddle audit."""

    name: str
    player: str
    estimate: GameEstimate
    diff_mean: float
    diff_std_error: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class AuditReport:
    """Saddle-point audit of the hitting-time pair at one start point."""

    s: float
    x: Tuple[float, ...]
    value_estimate: GameEstimate
    pde_value: float
    value_gap: float
    value_tolerance: float
    challengers: List[ChallengerResult]

    @property
    def value_matches(self) -> bool:
        return self.value_gap <= self.value_tolerance

    @property
    def passed(self) -> bool:
        return self.value_matches and all(c.passed for c in self.challengers)

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "value_matches": self.value_matches, "passed": self.passed}


@dataclass(frozen=True)
class MenuReport:
    """Common-random-number payoff matrix over finite strategy menus."""

    tau_names: List[str]
    rho_names: List[str]
    payoff_matrix: np.ndarray
    lower_value: float
    upper_value: float
    sigma: float

    @property
    def passed(self) -> bool:
        return self.lower_value <= self.upper_value + 6.0 * self.sigma

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau_names": self.tau_names,
            "rho_names": self.rho_names,
            "payoff_matrix": self.payoff_matrix.tolist(),
            "lower_value": self.lower_value,
            "upper_value": self.upper_value,
            "sigma": self.sigma,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class StartDiagnostics:
    """Outcome of the martingale inequality for one sampled start."""

    index: int
    s: float
    x: Tuple[float, ...]
    start_kind: str
    mean_increment: float
    std_error: float
    z_score: float


@dataclass(frozen=True)
class MartingaleTestReport:
    """Verdict of a stochastic super-/sub-solution test."""

    role: str
    n_start_times: int
    worst_violation: float
    violation_z_score: float
    z_threshold: float
    starts: List[StartDiagnostics]
    pointwise_witness: Optional[Tuple[float, ...]] = None
    skipped: bool = False
    notes: str = ""

    @property
    def passed(self) -> bool:
        if self.skipped or self.pointwise_witness is not None:
            return False
        return self.violation_z_score <= self.z_threshold

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass(frozen=True)
class DominationReport:
    """Sampled comparison of a semi-solution against the solver output."""

    role: str
    worst_margin: float
    witness: Tuple[float, ...]
    tolerance: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass(frozen=True)
class BracketReport:
    """Envelope sandwich ``max(subs) <= v <= min(supers)`` on sampled points."""

    lower_envelope_gap: float
    upper_envelope_gap: float
    bracket_width: float
    tolerance: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.lower_envelope_gap <= self.tolerance and self.upper_envelope_gap <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "passed": self.passed}
