"""SDE models and reproducible Euler-Maruyama path ensembles."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from ..data.models import GrowthReport, PathBundle, TimeGrid, as_points
from ..errors import ArgumentError, SimulationError
from ..utils import GROWTH_STREAM, blocks, derive_rng, ordered_map

logger = logging.getLogger(__name__)

Coefficient = Callable[[float, np.ndarray], Any]

MODEL_CATALOG = ("brownian", "ou", "gbm", "polynomial")


@dataclass(frozen=True)
class SdeModel:
    """Coefficients of ``dX = b(t, X) dt + sigma(t, X) dW``.

    ``drift(t, x)`` and ``diffusion(t, x)`` receive ``x`` of shape ``(n, dim)``
    and must return arrays broadcastable to ``(n, dim)`` and
    ``(n, dim, noise_dim)``.  Models are immutable and safe to share between
    worker threads.
    """

    name: str
    dim: int
    noise_dim: int
    drift: Coefficient = field(repr=False)
    diffusion: Coefficient = field(repr=False)
    growth_bound: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.noise_dim < 1:
            raise ArgumentError("dim and noise_dim must be positive")
        if self.growth_bound is not None and self.growth_bound < 0:
            raise ArgumentError("growth_bound must be nonnegative")

    def drift_at(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.broadcast_to(np.asarray(self.drift(t, x), dtype=float), x.shape)

    def diffusion_at(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        out = np.asarray(self.diffusion(t, x), dtype=float)
        return np.broadcast_to(out, (x.shape[0], self.dim, self.noise_dim))

    def covariance_at(self, t: float, x: np.ndarray) -> np.ndarray:
        """``sigma sigma^T`` at each point, shape ``(n, dim, dim)``."""
        sig = self.diffusion_at(t, x)
        return np.einsum("nik,njk->nij", sig, sig)

    def growth_ratio(self, t: float, x: np.ndarray) -> np.ndarray:
        """``(|b| + |sigma|) / (C (1 + |x|))`` with Euclidean and Frobenius norms."""
        if self.growth_bound is None:
            raise ArgumentError(f"model {self.name!r} declares no growth_bound")
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        size = (np.linalg.norm(self.drift_at(t, x), axis=1)
                + np.linalg.norm(self.diffusion_at(t, x), axis=(1, 2)))
        bound = self.growth_bound * (1.0 + np.linalg.norm(x, axis=1))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, size / np.where(bound > 0, bound, 1.0),
                             np.where(size > 0, np.inf, 0.0))
        return ratio


def brownian(dim: int = 1, sigma: float = 1.0, mu: float | Sequence[float] = 0.0,
             growth_bound: Optional[float] = None) -> SdeModel:
    """Scaled Brownian motion with constant drift: ``b = mu``, ``sigma I``."""
    mu_vec = np.broadcast_to(np.asarray(mu, dtype=float), (dim,)).copy()
    vol = float(sigma) * np.eye(dim)
    return SdeModel("brownian", dim, dim, lambda t, x: mu_vec, lambda t, x: vol,
                    growth_bound, {"sigma": float(sigma), "mu": mu_vec.tolist()})


def ou(dim: int = 1, theta: float = 1.0, mean: float = 0.0, sigma: float = 1.0,
       growth_bound: Optional[float] = None) -> SdeModel:
    """Ornstein-Uhlenbeck: ``b = theta (mean - x)``, ``sigma I``."""
    vol = float(sigma) * np.eye(dim)
    return SdeModel("ou", dim, dim, lambda t, x: theta * (mean - x), lambda t, x: vol,
                    growth_bound, {"theta": theta, "mean": mean, "sigma": sigma})


def gbm(dim: int = 1, mu: float = 0.0, sigma: float = 0.2,
        growth_bound: Optional[float] = None) -> SdeModel:
    """Componentwise geometric Brownian motion: ``b = mu x``, ``sigma diag(x)``."""
    eye = np.eye(dim)
    return SdeModel("gbm", dim, dim, lambda t, x: mu * x,
                    lambda t, x: sigma * x[:, :, None] * eye[None, :, :],
                    growth_bound, {"mu": mu, "sigma": sigma})


def polynomial(drift: Sequence[Sequence[float]], diffusion: Sequence[Sequence[float]],
               growth_bound: Optional[float] = None) -> SdeModel:
    """Diagonal model with per-axis polynomial coefficient tables.

    ``drift[i]`` lists ``c_0, c_1, ...`` so that ``b_i(x) = sum_k c_k x_i^k``;
    ``diffusion[i]`` does the same for the diagonal entry ``sigma_ii``.
    """
    drift_tab = [np.asarray(c, dtype=float) for c in drift]
    diff_tab = [np.asarray(c, dtype=float) for c in diffusion]
    if len(drift_tab) != len(diff_tab) or not drift_tab:
        raise ArgumentError("polynomial model needs one drift and one diffusion table per axis")
    dim = len(drift_tab)
    eye = np.eye(dim)

    def _eval(tables, x):
        return np.stack([np.polynomial.polynomial.polyval(x[:, i], c) for i, c in enumerate(tables)], axis=1)

    return SdeModel("polynomial", dim, dim,
                    lambda t, x: _eval(drift_tab, x),
                    lambda t, x: _eval(diff_tab, x)[:, :, None] * eye[None, :, :],
                    growth_bound,
                    {"drift": [c.tolist() for c in drift_tab], "diffusion": [c.tolist() for c in diff_tab]})


def model_from_catalog(name: str, **params: Any) -> SdeModel:
    """Build a catalog model by name (``brownian``, ``ou``, ``gbm``, ``polynomial``)."""
    builders = {"brownian": brownian, "ou": ou, "gbm": gbm, "polynomial": polynomial}
    if name not in builders:
        raise ArgumentError(f"unknown model {name!r}; choose one of {', '.join(MODEL_CATALOG)}")
    try:
        return builders[name](**params)
    except TypeError as e:
        raise ArgumentError(f"bad parameters for model {name!r}: {e}") from e


def _first_bad(values: np.ndarray) -> Optional[int]:
    flat = values.reshape(values.shape[0], -1)
    bad = ~np.all(np.isfinite(flat), axis=1)
    return int(np.argmax(bad)) if bad.any() else None


def _simulate_block(model: SdeModel, grid: TimeGrid, states: np.ndarray, seed: int, block: int) -> None:
    """Fill ``states`` (a view of one path block) in place."""
    m, n_nodes, _ = states.shape
    dt = grid.dt
    rng = derive_rng(seed, block)
    dw = rng.standard_normal((m, grid.n_steps, model.noise_dim)) * np.sqrt(dt)[None, :, None]
    for k in range(grid.n_steps):
        t = float(grid.nodes[k])
        x = states[:, k, :]
        b = model.drift_at(t, x)
        sig = model.diffusion_at(t, x)
        bad = _first_bad(b)
        if bad is None:
            bad = _first_bad(sig)
        if bad is not None:
            raise SimulationError("non-finite coefficient", t, x[bad])
        if model.growth_bound is not None:
            ratio = model.growth_ratio(t, x)
            if np.any(ratio > 1.0 + 1e-12):
                i = int(np.argmax(ratio))
                raise SimulationError(f"linear growth bound violated (ratio {ratio[i]:.4g})", t, x[i])
        x_next = x + b * dt[k] + (sig * dw[:, k, None, :]).sum(axis=-1)
        bad = _first_bad(x_next)
        if bad is not None:
            raise SimulationError("non-finite state", float(grid.nodes[k + 1]), x[bad])
        states[:, k + 1, :] = x_next


def simulate_paths(model: SdeModel, s: float, x: Any, grid: TimeGrid, n_paths: int, seed: int,
                   threads: Optional[int] = None) -> PathBundle:
    """Euler-Maruyama ensemble started at ``(s, x)`` on ``grid``.

    Paths are produced in fixed blocks whose noise stream depends only on
    ``(seed, block index)``, so the result is bit-identical for every value
    of ``threads``.
    """
    if n_paths < 1:
        raise ArgumentError("n_paths must be positive")
    if grid.s != s:
        raise ArgumentError(f"time grid starts at {grid.s}, not at s={s}")
    x0 = as_points(x, model.dim).reshape(-1)
    if x0.shape != (model.dim,):
        raise ArgumentError(f"initial point must have dimension {model.dim}")

    states = np.empty((int(n_paths), grid.n_steps + 1, model.dim))
    states[:, 0, :] = x0
    work = list(blocks(int(n_paths)))
    ordered_map(lambda blk: _simulate_block(model, grid, states[blk[1]:blk[2]], seed, blk[0]), work, threads)
    logger.debug("simulated %d paths of %s on %d steps (seed %d)", n_paths, model.name, grid.n_steps, seed)
    return PathBundle(model.name, grid, int(n_paths), int(seed), states)


def verify_growth(model: SdeModel, lo: Sequence[float], hi: Sequence[float], n_samples: int, seed: int,
                  t_range: tuple[float, float] = (0.0, 1.0)) -> GrowthReport:
    """Sample the box (corners and centre included) and report the worst growth ratio."""
    if model.growth_bound is None:
        raise ArgumentError(f"model {model.name!r} declares no growth_bound")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (model.dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (model.dim,))
    rng = derive_rng(seed, GROWTH_STREAM)
    pts = lo + (hi - lo) * rng.random((int(n_samples), model.dim))
    times = t_range[0] + (t_range[1] - t_range[0]) * rng.random(int(n_samples))
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(model.dim, -1).T
    extra = np.vstack([corners, (lo + hi)[None, :] / 2.0])
    pts = np.vstack([pts, extra, extra])
    times = np.concatenate([times, np.full(len(extra), t_range[0]), np.full(len(extra), t_range[1])])

    ratios = np.empty(len(pts))
    for t in np.unique(times):
        sel = times == t
        ratios[sel] = model.growth_ratio(float(t), pts[sel])
    i = int(np.argmax(ratios))
    report = GrowthReport(float(ratios[i]), tuple(float(c) for c in pts[i]), float(times[i]), len(pts))
    if not report.passed:
        logger.warning("growth bound of %s exceeded: ratio %.4g at x=%s", model.name, report.max_ratio, report.witness)
    return report


def terminal_moments(bundle: PathBundle) -> Dict[str, list]:
    """Sample mean and variance (ddof=1) of ``X_T`` per coordinate."""
    xt = bundle.terminal
    return {"mean": xt.mean(axis=0).tolist(), "variance": xt.var(axis=0, ddof=1).tolist()}
