"""test_sde.py

Tests for the SDE models and the Euler-Maruyama path ensembles:
reproducibility under threading, moment checks against closed forms,
coefficient failures and the sampled linear-growth check.
"""

import math

import numpy as np
import pytest

from dynkinlab.core.sde import (SdeModel, brownian, gbm, model_from_catalog, polynomial, simulate_paths,
                                terminal_moments, verify_growth)
from dynkinlab.data.models import TimeGrid
from dynkinlab.errors import ArgumentError, SimulationError
from dynkinlab.utils import PATH_BLOCK_SIZE


class TestSimulation:
    """Path generation."""

    def test_degenerate_dynamics_keep_the_start(self):
        model = brownian(1, sigma=0.0)
        bundle = simulate_paths(model, 0.0, 1.5, TimeGrid.uniform(0.0, 1.0, 17), 50, seed=3)
        assert bundle.states.shape == (50, 18, 1)
        assert np.all(bundle.states == 1.5)

    def test_brownian_moments(self):
        model = brownian(1, sigma=1.0)
        n = 100_000
        bundle = simulate_paths(model, 0.0, 0.0, TimeGrid.uniform(0.0, 1.0, 20), n, seed=11)
        moments = terminal_moments(bundle)
        assert abs(moments["mean"][0]) <= 4.0 / math.sqrt(n)
        assert abs(moments["variance"][0] - 1.0) <= 0.05

    def test_increments_over_sub_intervals(self):
        model = brownian(1, sigma=1.0)
        n = 20_000
        bundle = simulate_paths(model, 0.0, 0.0, TimeGrid.uniform(0.0, 1.0, 20), n, seed=13)
        nodes = bundle.grid.nodes
        for k1, k2 in ((0, 5), (8, 20)):
            dt = nodes[k2] - nodes[k1]
            dx = bundle.states[:, k2, 0] - bundle.states[:, k1, 0]
            assert abs(dx.mean()) <= 3.0 * math.sqrt(dt / n)
            assert abs(dx.var(ddof=1) - dt) <= 3.0 * dt * math.sqrt(2.0 / (n - 1))

    def test_step_displacement_scales_with_root_dt(self):
        """The 99% quantile of |X_{k+1} - X_k| over three refinements has log-slope 1/2 in dt."""
        model = brownian(1, sigma=1.0)
        dts, quantiles = [], []
        for n_steps in (10, 40, 160):
            bundle = simulate_paths(model, 0.0, 0.0, TimeGrid.uniform(0.0, 1.0, n_steps), 2000, seed=21)
            steps = np.abs(np.diff(bundle.states[:, :, 0], axis=1))
            dts.append(1.0 / n_steps)
            quantiles.append(np.quantile(steps, 0.99))
        slope = np.polyfit(np.log(dts), np.log(quantiles), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.05)

    def test_gbm_mean_matches_exponential(self):
        model = gbm(1, mu=0.1, sigma=0.2)
        n = 20_000
        bundle = simulate_paths(model, 0.0, 1.0, TimeGrid.uniform(0.0, 1.0, 100), n, seed=5)
        xt = bundle.terminal[:, 0]
        se = xt.std(ddof=1) / math.sqrt(n)
        assert abs(xt.mean() - math.exp(0.1)) <= 4.0 * se

    def test_bit_identical_across_thread_counts(self):
        model = brownian(2, sigma=0.7, mu=[0.1, -0.2])
        grid = TimeGrid.uniform(0.0, 1.0, 10)
        n = 2 * PATH_BLOCK_SIZE + 17
        serial = simulate_paths(model, 0.0, [0.0, 1.0], grid, n, seed=42, threads=1)
        parallel = simulate_paths(model, 0.0, [0.0, 1.0], grid, n, seed=42, threads=4)
        assert np.array_equal(serial.states, parallel.states)

    def test_seed_changes_paths(self):
        model = brownian(1)
        grid = TimeGrid.uniform(0.0, 1.0, 5)
        a = simulate_paths(model, 0.0, 0.0, grid, 100, seed=1)
        b = simulate_paths(model, 0.0, 0.0, grid, 100, seed=2)
        assert not np.array_equal(a.states, b.states)

    def test_prefix_of_a_larger_ensemble(self):
        """Block streams depend only on the block index, so a smaller run is a prefix of a larger one."""
        model = brownian(1)
        grid = TimeGrid.uniform(0.0, 1.0, 5)
        small = simulate_paths(model, 0.0, 0.0, grid, 100, seed=9)
        large = simulate_paths(model, 0.0, 0.0, grid, 300, seed=9)
        assert np.array_equal(small.states, large.states[:100])

    def test_non_finite_drift_names_the_point(self):
        model = SdeModel("blowup", 1, 1, lambda t, x: np.where(x > 0.5, np.nan, 0.0), lambda t, x: np.eye(1))
        with pytest.raises(SimulationError) as info:
            simulate_paths(model, 0.0, 1.0, TimeGrid.uniform(0.0, 1.0, 4), 10, seed=0)
        assert info.value.t == 0.0
        assert info.value.x == (1.0,)

    def test_growth_violation_during_simulation(self):
        model = brownian(1, sigma=1.0, growth_bound=0.5)
        with pytest.raises(SimulationError, match="linear growth"):
            simulate_paths(model, 0.0, 0.0, TimeGrid.uniform(0.0, 1.0, 4), 10, seed=0)

    def test_argument_errors(self):
        model = brownian(1)
        grid = TimeGrid.uniform(0.0, 1.0, 4)
        with pytest.raises(ArgumentError):
            simulate_paths(model, 0.0, 0.0, grid, 0, seed=0)
        with pytest.raises(ArgumentError):
            simulate_paths(model, 0.5, 0.0, grid, 10, seed=0)
        with pytest.raises(ArgumentError):
            simulate_paths(model, 0.0, [0.0, 1.0], grid, 10, seed=0)


class TestGrowth:
    """Sampled linear-growth check."""

    def test_brownian_passes(self):
        report = verify_growth(brownian(1, sigma=1.0, growth_bound=1.0), [-10.0], [10.0], 2000, seed=0)
        assert report.passed
        assert report.max_ratio <= 1.0

    def test_quadratic_drift_fails_near_the_edge(self):
        model = polynomial([[0.0, 0.0, 1.0]], [[0.0]], growth_bound=1.0)
        report = verify_growth(model, [-10.0], [10.0], 2000, seed=0)
        assert not report.passed
        assert abs(report.witness[0]) == pytest.approx(10.0)

    def test_linear_drift_within_bound(self):
        model = polynomial([[0.0, 2.0]], [[0.0]], growth_bound=2.0)
        assert verify_growth(model, [-5.0], [5.0], 2000, seed=0).passed

    def test_needs_a_declared_bound(self):
        with pytest.raises(ArgumentError):
            verify_growth(brownian(1), [-1.0], [1.0], 10, seed=0)


class TestCatalog:

    def test_catalog_builds_models(self):
        model = model_from_catalog("ou", theta=2.0, mean=1.0, sigma=0.5)
        assert model.name == "ou"
        assert model.drift_at(0.0, [[0.0]])[0, 0] == pytest.approx(2.0)

    def test_unknown_model(self):
        with pytest.raises(ArgumentError, match="unknown model"):
            model_from_catalog("heston")

    def test_bad_parameters(self):
        with pytest.raises(ArgumentError, match="bad parameters"):
            model_from_catalog("brownian", volatility=1.0)
