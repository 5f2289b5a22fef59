"""martingale.py

Falsification tests for stochastic super- and sub-solutions.

A candidate ``phi`` is a stochastic supersolution when ``phi >= l``,
``phi(T) >= g`` and ``phi(X)`` is a supermartingale between any stopping
time ``tau_1`` and the first later entry into ``{phi >= u}``.  The checker
samples a finite family of starts and ``tau_1`` rules and runs a one-sided
z-test on the unconditional inequality

    E[phi(tau_2 ^ rho^+, X)] <= E[phi(tau_1, X)].

Subsolutions are the mirror image.  A pass is evidence, never proof.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np

from ..core.obstacle import ObstacleProblem
from ..core.sde import SdeModel, simulate_paths
from ..data.models import (BracketReport, DominationReport, GridFunction, MartingaleTestReport, StartDiagnostics,
                           TimeGrid)
from ..errors import ArgumentError
from ..utils import MARTINGALE_STREAM, derive_rng, derive_seed, ordered_map

logger = logging.getLogger(__name__)

Box = Tuple[Sequence[float], Sequence[float]]


class Role(str, Enum):
    SUPERSOLUTION = "supersolution"
    SUBSOLUTION = "subsolution"
    NONE = "none"


@dataclass(frozen=True)
class CandidateFunction:
    """Continuous function ``(t, x) -> R`` evaluated with per-point times.

    ``evaluator(t, x)`` receives ``t`` of shape ``(n,)`` and ``x`` of shape
    ``(n, d)``.
    """

    name: str
    evaluator: Callable[[np.ndarray, np.ndarray], Any] = field(repr=False)
    role: Role = Role.NONE

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))

    def __call__(self, t: Any, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        return np.broadcast_to(np.asarray(self.evaluator(t, x), dtype=float), (x.shape[0],))

    @classmethod
    def constant(cls, value: float, role: Role | str = Role.NONE, name: str = "") -> "CandidateFunction":
        c = float(value)
        return cls(name or f"const({c:g})", lambda t, x: np.full(x.shape[0], c), role)

    @classmethod
    def affine(cls, slope: float | Sequence[float], intercept: float, role: Role | str = Role.NONE,
               time_slope: float = 0.0, name: str = "") -> "CandidateFunction":
        """``intercept + time_slope * t + <slope, x>``."""
        a = np.atleast_1d(np.asarray(slope, dtype=float))
        return cls(name or f"affine({a.tolist()}, {intercept:g})",
                   lambda t, x: intercept + time_slope * t + x @ a, role)

    @classmethod
    def from_grid(cls, v: GridFunction, role: Role | str = Role.NONE, name: str = "v_pde") -> "CandidateFunction":
        return cls(name, lambda t, x: v.evaluate_many(t, x), role)

    @classmethod
    def upper_bound(cls, problem: ObstacleProblem) -> "CandidateFunction":
        """The constant ``M`` of the declared bounds, a supersolution by construction."""
        if problem.bounds is None:
            raise ArgumentError("problem declares no bounds")
        return cls.constant(problem.bounds[1], Role.SUPERSOLUTION, "const_M")

    @classmethod
    def lower_bound(cls, problem: ObstacleProblem) -> "CandidateFunction":
        if problem.bounds is None:
            raise ArgumentError("problem declares no bounds")
        return cls.constant(problem.bounds[0], Role.SUBSOLUTION, "const_m")

    def minimum(self, other: "CandidateFunction") -> "CandidateFunction":
        return CandidateFunction(f"min({self.name}, {other.name})",
                                 lambda t, x: np.minimum(self(t, x), other(t, x)), self.role)

    def maximum(self, other: "CandidateFunction") -> "CandidateFunction":
        return CandidateFunction(f"max({self.name}, {other.name})",
                                 lambda t, x: np.maximum(self(t, x), other(t, x)), self.role)

    def negated(self) -> "CandidateFunction":
        role = {Role.SUPERSOLUTION: Role.SUBSOLUTION, Role.SUBSOLUTION: Role.SUPERSOLUTION}.get(self.role, Role.NONE)
        return CandidateFunction(f"-{self.name}", lambda t, x: -self(t, x), role)


@dataclass(frozen=True)
class MartingaleConfig:
    """Sampling plan of a martingale test."""

    n_paths: int = 100_000
    n_start_times: int = 8
    seed: int = 0
    n_steps: int = 50
    t0: float = 0.0
    z_threshold: float = 4.0
    n_pointwise: int = 2_000
    pointwise_tol: float = 0.0
    contact_tol: float = 0.0
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_paths < 2 or self.n_start_times < 1 or self.n_steps < 2:
            raise ArgumentError("need n_paths >= 2, n_start_times >= 1 and n_steps >= 2")
        if self.z_threshold <= 0 or self.pointwise_tol < 0 or self.contact_tol < 0:
            raise ArgumentError("z_threshold must be positive, pointwise_tol and contact_tol nonnegative")

    def time_grid(self, T: float) -> TimeGrid:
        return TimeGrid.uniform(self.t0, T, self.n_steps)


def _box(box: Box, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (dim,)).copy()
    if not np.all(lo < hi):
        raise ArgumentError(f"box must satisfy lo < hi, got {lo} and {hi}")
    return lo, hi


def _contact(role: Role, problem: ObstacleProblem, values: np.ndarray, t: float, x: np.ndarray,
             tol: float) -> np.ndarray:
    if role is Role.SUPERSOLUTION:
        return values >= problem.upper_at(t, x) - tol
    return values <= problem.lower_at(t, x) + tol


def _pointwise_witness(cand: CandidateFunction, role: Role, problem: ObstacleProblem, box: Box,
                       cfg: MartingaleConfig) -> Optional[Tuple[float, ...]]:
    """Hard check ``phi >= l, phi(T) >= g`` (supersolutions) or ``phi <= u, phi(T) <= g``."""
    lo, hi = _box(box, problem.dim)
    rng = derive_rng(cfg.seed, MARTINGALE_STREAM)
    n = cfg.n_pointwise
    pts = lo + (hi - lo) * rng.random((n, problem.dim))
    times = cfg.t0 + (problem.horizon - cfg.t0) * rng.random(n)
    T = problem.horizon
    vals = cand(times, pts)
    vals_T = cand(np.full(n, T), pts)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vals_T))):
        i = int(np.argmax(~np.isfinite(vals) | ~np.isfinite(vals_T)))
        return (float(times[i]), *map(float, pts[i]))
    g = problem.terminal_at(pts)
    if role is Role.SUPERSOLUTION:
        gap = vals - np.array([problem.lower_at(t, p[None, :])[0] for t, p in zip(times, pts)])
        gap_T = vals_T - g
    else:
        gap = np.array([problem.upper_at(t, p[None, :])[0] for t, p in zip(times, pts)]) - vals
        gap_T = g - vals_T
    bad = gap < -cfg.pointwise_tol
    if bad.any():
        i = int(np.argmin(gap))
        return (float(times[i]), *map(float, pts[i]))
    bad_T = gap_T < -cfg.pointwise_tol
    if bad_T.any():
        i = int(np.argmin(gap_T))
        return (float(T), *map(float, pts[i]))
    return None


def _z_score(role: Role, mean: float, se: float) -> float:
    signed = mean if role is Role.SUPERSOLUTION else -mean
    if se == 0.0:
        return 0.0 if signed <= 0.0 else float("inf")
    return signed / se


def _run_start(j: int, cand: CandidateFunction, role: Role, model: SdeModel, problem: ObstacleProblem,
               lo: np.ndarray, hi: np.ndarray, grid: TimeGrid, cfg: MartingaleConfig) -> StartDiagnostics:
    rng = derive_rng(cfg.seed, MARTINGALE_STREAM, j)
    i0 = int(rng.integers(0, grid.n_steps - 1))
    x0 = lo + (hi - lo) * rng.random(problem.dim)
    sub = grid.tail(i0)
    bundle = simulate_paths(model, sub.s, x0, sub, cfg.n_paths, derive_seed(cfg.seed, MARTINGALE_STREAM, j),
                            threads=1)
    M = sub.n_steps
    n = bundle.n_paths
    states = bundle.states

    if j % 2 == 0:
        kind = "deterministic"
        tau1 = np.full(n, int(rng.integers(0, M)))
    else:
        kind = "region_entry"
        a, b = lo + (hi - lo) * rng.random(problem.dim), lo + (hi - lo) * rng.random(problem.dim)
        r_lo, r_hi = np.minimum(a, b), np.maximum(a, b)
        inside = np.all((states >= r_lo) & (states <= r_hi), axis=2)
        inside[:, M] = True
        tau1 = np.argmax(inside, axis=1)
    k2 = rng.integers(1, M + 1, size=n)
    tau2 = np.maximum(tau1, k2)

    values = np.empty((n, M + 1))
    stop = tau2.copy()
    pending = np.ones(n, dtype=bool)
    for k in range(M + 1):
        t = float(sub.nodes[k])
        values[:, k] = cand(np.full(n, t), states[:, k, :])
        check = pending & (k >= tau1) & (k <= tau2)
        if check.any():
            idx = np.flatnonzero(check)
            hit = _contact(role, problem, values[idx, k], t, states[idx, k, :], cfg.contact_tol)
            stop[idx[hit]] = k
            pending[idx[hit]] = False
    rows = np.arange(n)
    increment = values[rows, stop] - values[rows, tau1]
    mean = float(np.mean(increment))
    se = 0.0 if np.all(increment == increment[0]) else float(np.std(increment, ddof=1) / np.sqrt(n))
    return StartDiagnostics(j, float(sub.s), tuple(float(c) for c in x0), kind, mean, se, _z_score(role, mean, se))


def _check(cand: CandidateFunction, role: Role, model: SdeModel, problem: ObstacleProblem, box: Box,
           cfg: MartingaleConfig) -> MartingaleTestReport:
    if model.dim != problem.dim:
        raise ArgumentError(f"model dimension {model.dim} does not match problem dimension {problem.dim}")
    witness = _pointwise_witness(cand, role, problem, box, cfg)
    if witness is not None:
        logger.warning("%s fails the obstacle comparison as %s at %s", cand.name, role.value, witness)
        return MartingaleTestReport(role.value, 0, float("inf"), float("inf"), cfg.z_threshold, [],
                                    pointwise_witness=witness, notes="pointwise obstacle check failed")
    lo, hi = _box(box, problem.dim)
    grid = cfg.time_grid(problem.horizon)
    starts = ordered_map(lambda j: _run_start(j, cand, role, model, problem, lo, hi, grid, cfg),
                         list(range(cfg.n_start_times)), cfg.threads)
    worst = max(starts, key=lambda d: d.z_score)
    signed = [d.mean_increment if role is Role.SUPERSOLUTION else -d.mean_increment for d in starts]
    report = MartingaleTestReport(role.value, len(starts), float(max(signed)), float(worst.z_score),
                                  cfg.z_threshold, starts)
    logger.info("%s as %s: worst z %.3g over %d starts (%s)", cand.name, role.value, report.violation_z_score,
                len(starts), "pass" if report.passed else "fail")
    return report


def check_supersolution(cand: CandidateFunction, model: SdeModel, problem: ObstacleProblem, box: Box,
                        cfg: MartingaleConfig) -> MartingaleTestReport:
    """Test ``cand`` as a stochastic supersolution on ``box``."""
    return _check(cand, Role.SUPERSOLUTION, model, problem, box, cfg)


def check_subsolution(cand: CandidateFunction, model: SdeModel, problem: ObstacleProblem, box: Box,
                      cfg: MartingaleConfig) -> MartingaleTestReport:
    """Test ``cand`` as a stochastic subsolution on ``box``."""
    return _check(cand, Role.SUBSOLUTION, model, problem, box, cfg)


def lattice_check(v1: CandidateFunction, v2: CandidateFunction, model: SdeModel, problem: ObstacleProblem,
                  box: Box, cfg: MartingaleConfig) -> MartingaleTestReport:
    """Check that the minimum of two supersolutions (maximum of two subsolutions) keeps the role.

    When an input fails its own check the test is skipped and the report
    says which input broke the precondition.
    """
    if v1.role is not v2.role or v1.role is Role.NONE:
        raise ArgumentError("lattice_check needs two candidates declared with the same role")
    role = v1.role
    for cand in (v1, v2):
        pre = _check(cand, role, model, problem, box, cfg)
        if not pre.passed:
            logger.warning("lattice check skipped: %s is not a %s", cand.name, role.value)
            return MartingaleTestReport(role.value, 0, float("nan"), float("nan"), cfg.z_threshold, [],
                                        skipped=True, notes=f"precondition failed for {cand.name}")
    combined = v1.minimum(v2) if role is Role.SUPERSOLUTION else v1.maximum(v2)
    return _check(combined, role, model, problem, box, cfg)


def _samples(v_pde: GridFunction, box: Box, n_samples: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = _box(box, v_pde.grid.dim)
    lo, hi = np.maximum(lo, v_pde.grid.lo), np.minimum(hi, v_pde.grid.hi)
    rng = derive_rng(seed, MARTINGALE_STREAM)
    pts = lo + (hi - lo) * rng.random((n_samples, v_pde.grid.dim))
    times = v_pde.times.s + (v_pde.times.T - v_pde.times.s) * rng.random(n_samples)
    return times, pts


def domination_check(cand: CandidateFunction, v_pde: GridFunction, box: Box, n_samples: int = 2_000,
                     seed: int = 0, tol: float = 1e-3) -> DominationReport:
    """Sample ``cand >= v_pde - tol`` (supersolutions) or ``cand <= v_pde + tol`` (subsolutions)."""
    if cand.role is Role.NONE:
        raise ArgumentError("domination_check needs a candidate with a declared role")
    times, pts = _samples(v_pde, box, n_samples, seed)
    diff = cand(times, pts) - v_pde.evaluate_many(times, pts)
    margin = diff if cand.role is Role.SUPERSOLUTION else -diff
    i = int(np.argmin(margin))
    report = DominationReport(cand.role.value, float(margin[i]), (float(times[i]), *map(float, pts[i])), tol,
                              n_samples)
    if not report.passed:
        logger.warning("%s violates domination by %.3g at %s", cand.name, -report.worst_margin, report.witness)
    return report


def perron_bracket(supersolutions: Sequence[CandidateFunction], subsolutions: Sequence[CandidateFunction],
                   v_pde: GridFunction, box: Box, n_samples: int = 2_000, seed: int = 0,
                   tol: float = 1e-3) -> BracketReport:
    """Sandwich ``max(subs) <= v_pde <= min(supers)`` on sampled points.

    Envelopes of finite families stay in their class by the lattice
    property, so the gaps measure how far the solver output sits outside
    the bracket they certify.
    """
    if not supersolutions or not subsolutions:
        raise ArgumentError("perron_bracket needs at least one supersolution and one subsolution")
    times, pts = _samples(v_pde, box, n_samples, seed)
    upper = np.min([c(times, pts) for c in supersolutions], axis=0)
    lower = np.max([c(times, pts) for c in subsolutions], axis=0)
    v = v_pde.evaluate_many(times, pts)
    return BracketReport(float(np.max(lower - v)), float(np.max(v - upper)), float(np.max(upper - lower)), tol,
                         n_samples)

