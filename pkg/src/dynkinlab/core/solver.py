"""solver.py

Backward time-stepping for the double obstacle problem on a tensor grid.

The generator is discretized by a monotone stencil (upwind first
differences for the drift, central second differences for the diffusion
and the Kushner cross-derivative stencil for off-diagonal covariance) and
assembled as a sparse matrix.  Two schemes are offered:

* ``explicit``: ``v^k = clamp(v^{k+1} + dt L v^{k+1}, l, u)``, valid under the
  nodewise CFL bound ``dt <= 1 / max_i sum_j w_ij``;
* ``implicit_psor``: ``(I - dt L) v^k = v^{k+1}`` subject to ``l <= v^k <= u``,
  solved by projected SOR with the nodes colored by the parity of their
  multi-index so every sweep is deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from ..data.models import ComplementarityReport, GridFunction, SpatialGrid, StoppingRegions, TimeGrid
from ..errors import ArgumentError, CflError, ConvergenceError, RegionOverlapError, SchemeError
from .obstacle import ObstacleProblem
from .sde import SdeModel

logger = logging.getLogger(__name__)

SCHEMES = ("explicit", "implicit_psor")


@dataclass(frozen=True)
class SolverOptions:
    """Tunables of ``solve`` and the post-solve checks."""

    scheme: str = "implicit_psor"
    omega: float = 1.5
    psor_tol: float = 1e-9
    max_iter: int = 10_000
    tol_pde: float = 1e-4
    contact_eps: Optional[float] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ArgumentError(f"unknown scheme {self.scheme!r}; choose one of {', '.join(SCHEMES)}")
        if not 0.0 < self.omega < 2.0:
            raise ArgumentError(f"relaxation omega must lie in (0, 2), got {self.omega}")
        if self.psor_tol <= 0 or self.tol_pde <= 0 or self.max_iter < 1:
            raise ArgumentError("psor_tol, tol_pde and max_iter must be positive")

    def contact_tolerance(self, times: TimeGrid) -> float:
        """``contact_eps`` or its default ``10 * tol_pde * dt``."""
        if self.contact_eps is not None:
            return float(self.contact_eps)
        return 10.0 * self.tol_pde * float(np.max(times.dt))


def _active_rows(grid: SpatialGrid) -> np.ndarray:
    """Nodes carrying an equation; Dirichlet boundary nodes are prescribed."""
    if grid.boundary_policy == "neumann_zero":
        return np.ones(grid.size, dtype=bool)
    return ~grid.boundary_mask


def _stencil_weights(model: SdeModel, grid: SpatialGrid, t: float) -> Dict[Tuple[int, ...], np.ndarray]:
    pts = grid.points
    b = model.drift_at(t, pts)
    a = model.covariance_at(t, pts)
    h = grid.spacing
    d = grid.dim
    weights: Dict[Tuple[int, ...], np.ndarray] = {}

    def unit(k: int, sign: int) -> np.ndarray:
        e = np.zeros(d, dtype=int)
        e[k] = sign
        return e

    def add(offset: np.ndarray, w: np.ndarray) -> None:
        key = tuple(int(o) for o in offset)
        weights[key] = weights.get(key, 0.0) + w

    for k in range(d):
        axis_w = 0.5 * a[:, k, k] / h[k] ** 2
        for m in range(d):
            if m != k:
                axis_w = axis_w - 0.5 * np.abs(a[:, k, m]) / (h[k] * h[m])
        add(unit(k, 1), axis_w + np.maximum(b[:, k], 0.0) / h[k])
        add(unit(k, -1), axis_w + np.maximum(-b[:, k], 0.0) / h[k])
        for m in range(k + 1, d):
            c = a[:, k, m] / (2.0 * h[k] * h[m])
            pos, neg = np.maximum(c, 0.0), np.maximum(-c, 0.0)
            add(unit(k, 1) + unit(m, 1), pos)
            add(unit(k, -1) + unit(m, -1), pos)
            add(unit(k, 1) + unit(m, -1), neg)
            add(unit(k, -1) + unit(m, 1), neg)
    return weights


def _neighbor_index(grid: SpatialGrid, rows: np.ndarray, offset: Tuple[int, ...]) -> np.ndarray:
    idx = grid.multi_index[rows] + np.asarray(offset)
    upper = np.asarray(grid.shape) - 1
    if grid.boundary_policy == "neumann_zero":
        idx = np.where(idx < 0, -idx, idx)
        idx = np.where(idx > upper, 2 * upper - idx, idx)
    return np.ravel_multi_index(tuple(idx.T), grid.shape)


def assemble_generator(model: SdeModel, grid: SpatialGrid, t: float) -> sparse.csr_matrix:
    """Sparse discrete generator ``L_h(t)``; Dirichlet boundary rows are zero.

    Raises ``SchemeError`` when a neighbor weight is negative (the covariance
    is not diagonally dominant enough for the grid spacing).
    """
    if grid.dim != model.dim:
        raise ArgumentError(f"grid dimension {grid.dim} does not match model dimension {model.dim}")
    rows = np.flatnonzero(_active_rows(grid))
    rr: List[np.ndarray] = []
    cc: List[np.ndarray] = []
    vv: List[np.ndarray] = []
    diag = np.zeros(grid.size)
    for offset, w in _stencil_weights(model, grid, t).items():
        w = np.broadcast_to(np.asarray(w, dtype=float), (grid.size,))[rows]
        scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
        if np.any(w < -1e-12 * scale):
            i = rows[int(np.argmin(w))]
            raise SchemeError(f"negative stencil weight {w.min():.4g} towards offset {offset} "
                              f"at x={grid.points[i].tolist()}, t={t}")
        w = np.maximum(w, 0.0)
        keep = w > 0
        if not keep.any():
            continue
        rr.append(rows[keep])
        cc.append(_neighbor_index(grid, rows[keep], offset))
        vv.append(w[keep])
        np.subtract.at(diag, rows[keep], w[keep])
    rr.append(rows)
    cc.append(rows)
    vv.append(diag[rows])
    L = sparse.coo_matrix((np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))),
                          shape=(grid.size, grid.size))
    return L.tocsr()


def cfl_limit(L: sparse.csr_matrix) -> float:
    """Largest step keeping ``I + dt L`` nonnegative."""
    total = float(np.max(-L.diagonal())) if L.shape[0] else 0.0
    return np.inf if total <= 0 else 1.0 / total


class _GeneratorCache:
    """Reassembles ``L_h(t)`` only when the coefficients change between steps."""

    def __init__(self, model: SdeModel, grid: SpatialGrid):
        self.model = model
        self.grid = grid
        self._coeffs: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._L: Optional[sparse.csr_matrix] = None
        self.assemblies = 0

    def at(self, t: float) -> sparse.csr_matrix:
        pts = self.grid.points
        coeffs = (np.array(self.model.drift_at(t, pts)), np.array(self.model.diffusion_at(t, pts)))
        if (self._L is None or not np.array_equal(coeffs[0], self._coeffs[0])
                or not np.array_equal(coeffs[1], self._coeffs[1])):
            self._L = assemble_generator(self.model, self.grid, t)
            self._coeffs = coeffs
            self.assemblies += 1
        return self._L


def _obstacles(problem: ObstacleProblem, grid: SpatialGrid, t: float) -> Tuple[np.ndarray, np.ndarray]:
    return problem.lower_at(t, grid.points), problem.upper_at(t, grid.points)


def _colors(grid: SpatialGrid, active: np.ndarray) -> List[np.ndarray]:
    parity = (grid.multi_index % 2) @ (2 ** np.arange(grid.dim))
    return [np.flatnonzero(active & (parity == c)) for c in range(2 ** grid.dim)]


def _psor(rhs: np.ndarray, v: np.ndarray, lo: np.ndarray, hi: np.ndarray,
          colors: List[np.ndarray], blocks: List[Tuple[sparse.csr_matrix, np.ndarray]],
          opts: SolverOptions, step: int) -> Tuple[np.ndarray, int]:
    """Projected SOR on ``A v = rhs`` with ``lo <= v <= hi``; updates ``v`` in place."""
    update = np.inf
    for it in range(1, opts.max_iter + 1):
        update = 0.0
        for rows, (A_c, diag_c) in zip(colors, blocks):
            if rows.size == 0:
                continue
            r = rhs[rows] - A_c @ v
            new = np.minimum(hi[rows], np.maximum(lo[rows], v[rows] + opts.omega * r / diag_c))
            update = max(update, float(np.max(np.abs(new - v[rows]))))
            v[rows] = new
        if update <= opts.psor_tol:
            return v, it
    raise ConvergenceError(update, opts.max_iter, step)


def solve(model: SdeModel, problem: ObstacleProblem, grid: SpatialGrid, tgrid: TimeGrid,
          scheme: Optional[str] = None, opts: Optional[SolverOptions] = None) -> GridFunction:
    """Grid approximation of the value function by backward induction.

    The terminal surface is ``clamp(g, l(T), u(T))``; each earlier surface
    solves the linear step and is then projected onto ``[l, u]``.  Dirichlet
    boundary nodes are pinned to ``clamp(g, l, u)``.
    """
    opts = opts or SolverOptions()
    scheme = scheme or opts.scheme
    if scheme not in SCHEMES:
        raise ArgumentError(f"unknown scheme {scheme!r}; choose one of {', '.join(SCHEMES)}")
    if not (grid.dim == model.dim == problem.dim):
        raise ArgumentError(f"dimensions disagree: grid {grid.dim}, model {model.dim}, problem {problem.dim}")
    if abs(tgrid.T - problem.horizon) > 1e-12 * max(1.0, problem.horizon):
        raise ArgumentError(f"time grid ends at {tgrid.T}, problem horizon is {problem.horizon}")
    problem.check_on_grid(tgrid.nodes, grid.points)
    problem.verify_bounds(tgrid.nodes, grid.points)

    n = grid.size
    active = _active_rows(grid)
    boundary = ~active
    g = problem.terminal_at(grid.points)
    values = np.empty((tgrid.n_steps + 1, n))
    lo_T, hi_T = _obstacles(problem, grid, tgrid.T)
    values[-1] = np.minimum(hi_T, np.maximum(lo_T, g))

    cache = _GeneratorCache(model, grid)
    colors = _colors(grid, active) if scheme == "implicit_psor" else []
    blocks: List[Tuple[sparse.csr_matrix, np.ndarray]] = []
    block_key: Optional[Tuple[int, float]] = None
    sweeps = 0
    logger.info("solving %s on %s grid x %d steps (%s, %s boundary)",
                model.name, "x".join(map(str, grid.shape)), tgrid.n_steps, scheme, grid.boundary_policy)

    for k in range(tgrid.n_steps - 1, -1, -1):
        t = float(tgrid.nodes[k])
        dt = float(tgrid.nodes[k + 1] - tgrid.nodes[k])
        L = cache.at(t)
        lo, hi = _obstacles(problem, grid, t)
        nxt = values[k + 1]
        cur = values[k]
        cur[boundary] = np.minimum(hi[boundary], np.maximum(lo[boundary], g[boundary]))

        if scheme == "explicit":
            dt_max = cfl_limit(L)
            if dt > dt_max * (1.0 + 1e-12):
                raise CflError(dt, dt_max)
            w = nxt + dt * (L @ nxt)
            cur[active] = np.minimum(hi[active], np.maximum(lo[active], w[active]))
            continue

        if block_key != (cache.assemblies, dt):
            A = (sparse.identity(n, format="csr") - dt * L).tocsr()
            blocks = [(A[rows], A.diagonal()[rows]) for rows in colors]
            block_key = (cache.assemblies, dt)
        cur[active] = np.minimum(hi[active], np.maximum(lo[active], nxt[active]))
        _, iterations = _psor(nxt, cur, lo, hi, colors, blocks, opts, k)
        sweeps += iterations
        logger.debug("step %d: PSOR converged in %d sweeps", k, iterations)

    if scheme == "implicit_psor":
        logger.info("solve finished: %d PSOR sweeps over %d steps", sweeps, tgrid.n_steps)
    else:
        logger.info("solve finished (explicit)")
    return GridFunction(grid, tgrid, values, scheme)


def discrete_pde_term(v: GridFunction, model: SdeModel, k: int) -> np.ndarray:
    """Discrete ``-v_t - L v`` at time node ``k < N`` using the scheme's own time level."""
    L = assemble_generator(model, v.grid, float(v.times.nodes[k]))
    dt = float(v.times.nodes[k + 1] - v.times.nodes[k])
    at = v.values[k + 1] if v.scheme == "explicit" else v.values[k]
    return (v.values[k] - v.values[k + 1]) / dt - L @ at


def complementarity_report(v: GridFunction, model: SdeModel, problem: ObstacleProblem,
                           opts: Optional[SolverOptions] = None, n_worst: int = 5) -> ComplementarityReport:
    """Classify interior nodes and report the worst complementarity violations.

    Continuation nodes need ``|-v_t - L v| <= tol_pde``; lower contact
    nodes need ``-v_t - L v >= -tol_pde``; upper contact nodes need
    ``-v_t - L v <= tol_pde``.
    """
    opts = opts or SolverOptions(scheme=v.scheme)
    eps = opts.contact_tolerance(v.times)
    tol = opts.tol_pde
    interior = v.grid.interior_mask()
    max_residual = 0.0
    sign_violations = 0
    checked = 0
    candidates: List[Tuple[float, Dict]] = []

    for k in range(v.times.n_steps):
        t = float(v.times.nodes[k])
        term = discrete_pde_term(v, model, k)
        lo, hi = _obstacles(problem, v.grid, t)
        val = v.values[k]
        at_lower = val <= lo + eps
        at_upper = val >= hi - eps
        cont = interior & ~at_lower & ~at_upper
        low_only = interior & at_lower & ~at_upper
        up_only = interior & at_upper & ~at_lower
        checked += int(np.count_nonzero(interior))

        if cont.any():
            max_residual = max(max_residual, float(np.max(np.abs(term[cont]))))
        excess = np.zeros_like(term)
        excess[cont] = np.abs(term[cont]) - tol
        excess[low_only] = -tol - term[low_only]
        excess[up_only] = term[up_only] - tol
        bad = np.flatnonzero(excess > 0)
        sign_violations += int(np.count_nonzero(excess[low_only | up_only] > 0))
        for i in bad[np.argsort(-excess[bad], kind="stable")][:n_worst]:
            kind = "continuation" if cont[i] else ("lower_contact" if low_only[i] else "upper_contact")
            candidates.append((float(excess[i]), {
                "k": k, "t": t, "x": v.grid.points[i].tolist(), "v": float(val[i]),
                "pde_term": float(term[i]), "kind": kind,
            }))

    candidates.sort(key=lambda c: -c[0])
    report = ComplementarityReport(max_residual, sign_violations, [c[1] for c in candidates[:n_worst]],
                                   tol, eps, checked)
    if not report.passed:
        logger.warning("complementarity check failed: residual %.3g, %d sign violations",
                       max_residual, sign_violations)
    return report


def extract_regions(v: GridFunction, problem: ObstacleProblem, contact_eps: Optional[float] = None) -> StoppingRegions:
    """Contact sets ``{v >= u - eps}`` and ``{v <= l + eps}`` over every (time, space) node."""
    eps = SolverOptions().contact_tolerance(v.times) if contact_eps is None else float(contact_eps)
    shape = v.values.shape
    lower = np.empty(shape)
    upper = np.empty(shape)
    for k, t in enumerate(v.times.nodes):
        lower[k], upper[k] = _obstacles(problem, v.grid, float(t))
    lower_mask = v.values <= lower + eps
    if problem.single_obstacle:
        upper_mask = np.zeros(shape, dtype=bool)
    else:
        upper_mask = v.values >= upper - eps
    overlap = lower_mask & upper_mask & (upper - lower > 2.0 * eps)
    if overlap.any():
        k, j = np.unravel_index(int(np.argmax(overlap)), shape)
        raise RegionOverlapError(f"stopping regions overlap at t={v.times.nodes[k]}, "
                                 f"x={v.grid.points[j].tolist()} where u - l > 2 eps")
    return StoppingRegions(upper_mask, lower_mask, eps)

