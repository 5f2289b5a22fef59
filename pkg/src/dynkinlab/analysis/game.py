"""game.py

Dynkin-game payoffs on simulated paths.

The maximizer picks the stopping index ``k_tau`` and collects the lower
obstacle, the minimizer picks ``k_rho`` and pays the upper obstacle; ties
before the horizon go to the minimizer.  Strategies are first-entry rules
evaluated forward in time, so every decision only uses the path up to the
current node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, List, Optional, Sequence

import numpy as np

from ..core.obstacle import ObstacleProblem
from ..core.sde import SdeModel, simulate_paths
from ..data.models import (AuditReport, ChallengerResult, GameEstimate, GridFunction, MenuReport, PathBundle,
                           StoppingRegions, TimeGrid)
from ..errors import ArgumentError, GameError
from ..utils import ordered_map

logger = logging.getLogger(__name__)


class StrategyKind(str, Enum):
    HIT_LOWER_REGION = "hit_lower_region"
    HIT_UPPER_REGION = "hit_upper_region"
    FIXED_TIME = "fixed_time"
    THRESHOLD = "threshold"
    NEVER_STOP = "never_stop"
    CUSTOM_MASK = "custom_mask"


class Player(str, Enum):
    MINIMIZER_RHO = "minimizer_rho"
    MAXIMIZER_TAU = "maximizer_tau"

    @property
    def other(self) -> "Player":
        return Player.MAXIMIZER_TAU if self is Player.MINIMIZER_RHO else Player.MINIMIZER_RHO


@dataclass(frozen=True)
class Strategy:
    """A first-entry stopping rule for one player.

    Payload by kind:
      * ``fixed_time``: ``time``;
      * ``threshold``: ``level``, ``axis`` and ``direction`` (``"above"`` stops
        once ``X[axis] >= level``, ``"below"`` once ``X[axis] <= level``);
      * ``hit_lower_region`` / ``hit_upper_region``: ``value`` (the solved grid
        function), ``problem``, contact ``tolerance`` and a signed ``offset``
        that enlarges (positive) or shrinks (negative) the stopping region;
      * ``custom_mask``: ``value`` holding a 0/1 indicator surface.
    """

    kind: StrategyKind
    player: Player
    name: str = ""
    time: Optional[float] = None
    level: Optional[float] = None
    axis: int = 0
    direction: str = "above"
    value: Optional[GridFunction] = field(default=None, repr=False, compare=False)
    problem: Optional[ObstacleProblem] = field(default=None, repr=False, compare=False)
    tolerance: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        object.__setattr__(self, "player", Player(self.player))
        if not self.name:
            object.__setattr__(self, "name", f"{self.kind.value}@{self.player.value}")
        if self.kind is StrategyKind.FIXED_TIME and self.time is None:
            raise ArgumentError("fixed_time strategy needs a time")
        if self.kind is StrategyKind.THRESHOLD:
            if self.level is None or self.direction not in ("above", "below"):
                raise ArgumentError("threshold strategy needs a level and direction 'above' or 'below'")
        if self.kind in (StrategyKind.HIT_LOWER_REGION, StrategyKind.HIT_UPPER_REGION):
            if self.value is None or self.problem is None:
                raise ArgumentError("hitting strategies need the value function and the problem")
        if self.kind is StrategyKind.CUSTOM_MASK and self.value is None:
            raise ArgumentError("custom_mask strategy needs an indicator surface")

    @classmethod
    def fixed_time(cls, player: Player | str, t: float, name: str = "") -> "Strategy":
        return cls(StrategyKind.FIXED_TIME, player, name, time=float(t))

    @classmethod
    def never_stop(cls, player: Player | str, name: str = "") -> "Strategy":
        return cls(StrategyKind.NEVER_STOP, player, name)

    @classmethod
    def threshold(cls, player: Player | str, level: float, axis: int = 0, direction: str = "above",
                  name: str = "") -> "Strategy":
        return cls(StrategyKind.THRESHOLD, player, name, level=float(level), axis=axis, direction=direction)

    @classmethod
    def custom_mask(cls, player: Player | str, indicator: GridFunction, name: str = "") -> "Strategy":
        return cls(StrategyKind.CUSTOM_MASK, player, name, value=indicator)

    def _contact(self, t: float, x: np.ndarray) -> np.ndarray:
        v = self.value.evaluate(t, x)
        if self.kind is StrategyKind.HIT_LOWER_REGION:
            return v <= (self.problem.lower_at(t, x) + self.tolerance) + self.offset
        return v >= (self.problem.upper_at(t, x) - self.tolerance) - self.offset

    def _stops(self, k: int, t: float, x: np.ndarray, times: TimeGrid) -> np.ndarray:
        if self.kind is StrategyKind.NEVER_STOP:
            return np.zeros(len(x), dtype=bool)
        if self.kind is StrategyKind.FIXED_TIME:
            return np.full(len(x), k >= times.index_at_or_after(self.time))
        if self.kind is StrategyKind.THRESHOLD:
            coord = x[:, self.axis]
            return coord >= self.level if self.direction == "above" else coord <= self.level
        if self.kind is StrategyKind.CUSTOM_MASK:
            return self.value.evaluate(t, x) >= 0.5
        return self._contact(t, x)

    def stop_indices(self, bundle: PathBundle) -> np.ndarray:
        """First stopping index per path; ``N`` (the horizon) if the rule never fires."""
        times = bundle.grid
        N = times.n_steps
        out = np.full(bundle.n_paths, N, dtype=int)
        if self.kind is StrategyKind.NEVER_STOP:
            return out
        if self.kind is StrategyKind.FIXED_TIME:
            out[:] = times.index_at_or_after(self.time)
            return out
        alive = np.ones(bundle.n_paths, dtype=bool)
        for k in range(N):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            hit = self._stops(k, float(times.nodes[k]), bundle.states[idx, k, :], times)
            out[idx[hit]] = k
            alive[idx[hit]] = False
        return out

    def swapped(self) -> "Strategy":
        """The same rule played by the other side of the player-swapped game."""
        kind = {StrategyKind.HIT_LOWER_REGION: StrategyKind.HIT_UPPER_REGION,
                StrategyKind.HIT_UPPER_REGION: StrategyKind.HIT_LOWER_REGION}.get(self.kind, self.kind)
        value, problem = self.value, self.problem
        if self.kind in (StrategyKind.HIT_LOWER_REGION, StrategyKind.HIT_UPPER_REGION):
            value, problem = value.negated(), problem.swapped()
        return replace(self, kind=kind, player=self.player.other, value=value, problem=problem)


def hitting_strategy(regions: StoppingRegions, v: GridFunction, side: Player | str, problem: ObstacleProblem,
                     offset: float = 0.0, name: str = "") -> Strategy:
    """First entry into the player's stopping region.

    Membership is decided by interpolating ``v`` along the path and
    comparing with the obstacle: ``v <= l + eps`` for the maximizer,
    ``v >= u - eps`` for the minimizer.  A positive ``offset`` widens the
    region by that amount.  A minimizer facing an empty upper region never
    stops unless a positive offset widens it.
    """
    side = Player(side)
    if side is Player.MINIMIZER_RHO:
        if problem.single_obstacle or (regions.upper_empty and offset <= 0.0):
            return Strategy.never_stop(side, name or "rho_star")
        return Strategy(StrategyKind.HIT_UPPER_REGION, side, name or "rho_star", value=v, problem=problem,
                        tolerance=regions.tolerance, offset=offset)
    return Strategy(StrategyKind.HIT_LOWER_REGION, side, name or "tau_star", value=v, problem=problem,
                    tolerance=regions.tolerance, offset=offset)


def _check_player(strategy: Strategy, player: Player) -> None:
    if strategy.player is not player:
        raise ArgumentError(f"strategy {strategy.name!r} belongs to {strategy.player.value}, expected {player.value}")


def _field_along(fn, times: TimeGrid, k_idx: np.ndarray, states: np.ndarray) -> np.ndarray:
    out = np.empty(len(k_idx))
    for k in np.unique(k_idx):
        sel = k_idx == k
        out[sel] = fn(float(times.nodes[k]), states[sel, k, :])
    return out


def payoff_on_path(path: np.ndarray, times: TimeGrid, tau_index: int, rho_index: int,
                   problem: ObstacleProblem) -> float:
    """Realized payoff of one path ``(N+1, d)`` for the given stopping indices."""
    bundle = PathBundle("path", times, 1, 0, np.asarray(path, dtype=float)[None, :, :])
    return float(payoffs(bundle, np.array([tau_index]), np.array([rho_index]), problem)[0])


def payoffs(bundle: PathBundle, tau_index: np.ndarray, rho_index: np.ndarray, problem: ObstacleProblem) -> np.ndarray:
    """Vectorized payoff over a bundle; ties before the horizon pay the upper obstacle."""
    times = bundle.grid
    N = times.n_steps
    tau_index = np.asarray(tau_index, dtype=int)
    rho_index = np.asarray(rho_index, dtype=int)
    if np.any((tau_index < 0) | (tau_index > N) | (rho_index < 0) | (rho_index > N)):
        raise ArgumentError(f"stopping indices must lie in [0, {N}]")
    lower = tau_index < rho_index
    upper = (rho_index <= tau_index) & (rho_index < N)
    terminal = ~lower & ~upper
    if upper.any() and problem.single_obstacle:
        raise GameError("upper payoff requested before the horizon in single-obstacle mode")
    out = np.empty(bundle.n_paths)
    if lower.any():
        out[lower] = _field_along(problem.lower_at, times, tau_index[lower], bundle.states[lower])
    if upper.any():
        out[upper] = _field_along(problem.upper_at, times, rho_index[upper], bundle.states[upper])
    if terminal.any():
        out[terminal] = problem.terminal_at(bundle.states[terminal, N, :])
    return out


@dataclass(frozen=True)
class PayoffSample:
    """Per-path stopping indices and payoffs for one strategy pair on one bundle."""

    bundle: PathBundle = field(repr=False)
    tau_index: np.ndarray = field(repr=False)
    rho_index: np.ndarray = field(repr=False)
    payoffs: np.ndarray = field(repr=False)

    def estimate(self) -> GameEstimate:
        return summarize(self.payoffs, self.tau_index, self.rho_index, self.bundle.grid)


def _std_error(values: np.ndarray) -> float:
    if len(values) < 2 or np.all(values == values[0]):
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def summarize(values: np.ndarray, tau_index: np.ndarray, rho_index: np.ndarray, times: TimeGrid) -> GameEstimate:
    n = len(values)
    N = times.n_steps
    lower = np.count_nonzero(tau_index < rho_index)
    upper = np.count_nonzero((rho_index <= tau_index) & (rho_index < N))
    breakdown = {"lower": lower / n, "upper": upper / n, "terminal": (n - lower - upper) / n}
    mean = float(values[0]) if np.all(values == values[0]) else float(np.mean(values))
    return GameEstimate(mean, _std_error(values), n, breakdown,
                        float(np.mean(times.nodes[tau_index])), float(np.mean(times.nodes[rho_index])))


def evaluate_on_bundle(bundle: PathBundle, problem: ObstacleProblem, tau: Strategy, rho: Strategy) -> PayoffSample:
    _check_player(tau, Player.MAXIMIZER_TAU)
    _check_player(rho, Player.MINIMIZER_RHO)
    if problem.single_obstacle and rho.kind is not StrategyKind.NEVER_STOP:
        raise GameError(f"single-obstacle mode requires the minimizer to never stop, got {rho.name!r}")
    k_tau = tau.stop_indices(bundle)
    k_rho = rho.stop_indices(bundle)
    return PayoffSample(bundle, k_tau, k_rho, payoffs(bundle, k_tau, k_rho, problem))


@dataclass(frozen=True)
class MonteCarloConfig:
    """Ensemble size, seed and time resolution of a Monte Carlo evaluation."""

    n_paths: int
    seed: int
    n_steps: int = 100
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ArgumentError("n_paths and n_steps must be positive")

    def time_grid(self, s: float, T: float) -> TimeGrid:
        return TimeGrid.uniform(s, T, self.n_steps)


def simulate_for(model: SdeModel, problem: ObstacleProblem, s: float, x: Any, mc: MonteCarloConfig) -> PathBundle:
    return simulate_paths(model, s, x, mc.time_grid(s, problem.horizon), mc.n_paths, mc.seed, mc.threads)


def estimate_value(model: SdeModel, problem: ObstacleProblem, s: float, x: Any, tau: Strategy, rho: Strategy,
                   mc: MonteCarloConfig) -> GameEstimate:
    """Sample mean and standard error of ``J(s, x, tau, rho)`` on a fresh ensemble."""
    bundle = simulate_for(model, problem, s, x, mc)
    return evaluate_on_bundle(bundle, problem, tau, rho).estimate()


def default_challengers(problem: ObstacleProblem, v: GridFunction, regions: StoppingRegions, s: float,
                        shifts: Sequence[float] = (0.05,)) -> List[Strategy]:
    """Immediate, midway and never stopping plus shifted hitting rules for both players.

    In single-obstacle mode only the maximizer is challenged.
    """
    T = problem.horizon
    players = [Player.MAXIMIZER_TAU] if problem.single_obstacle else list(Player)
    menu: List[Strategy] = []
    for player in players:
        tag = "tau" if player is Player.MAXIMIZER_TAU else "rho"
        menu += [Strategy.fixed_time(player, s, f"{tag}_now"),
                 Strategy.fixed_time(player, 0.5 * (s + T), f"{tag}_mid"),
                 Strategy.never_stop(player, f"{tag}_never")]
        for shift in shifts:
            for sign in (1.0, -1.0):
                menu.append(hitting_strategy(regions, v, player, problem, sign * shift,
                                             f"{tag}_shift{sign * shift:+g}"))
    return menu


def saddle_audit(model: SdeModel, problem: ObstacleProblem, v: GridFunction, regions: StoppingRegions, s: float,
                 x: Any, challengers: Sequence[Strategy], mc: MonteCarloConfig,
                 scheme_tolerance: float = 0.0) -> AuditReport:
    """Look for a profitable unilateral deviation from the hitting-time pair.

    All evaluations share one ensemble; each challenger is compared through
    the paired difference of payoffs, whose standard error is the ``sigma``
    of its pass condition.
    """
    bundle = simulate_for(model, problem, s, x, mc)
    tau_star = hitting_strategy(regions, v, Player.MAXIMIZER_TAU, problem)
    rho_star = hitting_strategy(regions, v, Player.MINIMIZER_RHO, problem)
    base = evaluate_on_bundle(bundle, problem, tau_star, rho_star)
    base_est = base.estimate()

    def challenge(ch: Strategy) -> ChallengerResult:
        if ch.player is Player.MAXIMIZER_TAU:
            sample = evaluate_on_bundle(bundle, problem, ch, rho_star)
        else:
            sample = evaluate_on_bundle(bundle, problem, tau_star, ch)
        diff = sample.payoffs - base.payoffs
        mean, se = float(np.mean(diff)), _std_error(diff)
        ok = mean <= 3.0 * se if ch.player is Player.MAXIMIZER_TAU else mean >= -3.0 * se
        return ChallengerResult(ch.name, ch.player.value, sample.estimate(), mean, se, bool(ok))

    results = ordered_map(challenge, list(challengers), mc.threads)
    x_tuple = tuple(float(c) for c in np.atleast_1d(np.asarray(x, dtype=float)))
    pde_value = v.value_at(s, x_tuple)
    report = AuditReport(s, x_tuple, base_est, pde_value, abs(base_est.mean - pde_value),
                         3.0 * base_est.std_error + scheme_tolerance, results)
    failed = [c.name for c in results if not c.passed]
    if report.passed:
        logger.info("saddle audit at x=%s passed: J=%.5f (se %.2g), v=%.5f", x_tuple, base_est.mean,
                    base_est.std_error, pde_value)
    else:
        logger.warning("saddle audit at x=%s failed: gap %.3g (tol %.3g), profitable deviations %s", x_tuple,
                       report.value_gap, report.value_tolerance, failed)
    return report


def menu_values(model: SdeModel, problem: ObstacleProblem, s: float, x: Any, tau_menu: Sequence[Strategy],
                rho_menu: Sequence[Strategy], mc: MonteCarloConfig) -> MenuReport:
    """Payoff matrix over finite menus with max-min and min-max values."""
    if not tau_menu or not rho_menu:
        raise ArgumentError("both strategy menus must be nonempty")
    bundle = simulate_for(model, problem, s, x, mc)
    pairs = [(i, j) for i in range(len(tau_menu)) for j in range(len(rho_menu))]
    estimates = ordered_map(lambda ij: evaluate_on_bundle(bundle, problem, tau_menu[ij[0]], rho_menu[ij[1]]).estimate(),
                            pairs, mc.threads)
    matrix = np.array([e.mean for e in estimates]).reshape(len(tau_menu), len(rho_menu))
    sigma = max(e.std_error for e in estimates)
    lower = float(np.max(np.min(matrix, axis=1)))
    upper = float(np.min(np.max(matrix, axis=0)))
    return MenuReport([t.name for t in tau_menu], [r.name for r in rho_menu], matrix, lower, upper, sigma)
