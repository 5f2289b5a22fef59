"""test_martingale.py

Tests for the stochastic super-/sub-solution checks, the lattice
property, domination of the solver output and the envelope bracket.

The drift-only case (b = 1, sigma = 0, l = g = (1 - x)^+) has explicit
semi-solutions: 2 - x and 1.5 - 0.5 x decrease along every path and sit
above the obstacle, x - 3 and 0.5 x - 2 increase and sit below it.
"""

import numpy as np
import pytest

from dynkinlab.analysis.martingale import (CandidateFunction, MartingaleConfig, Role, check_subsolution,
                                           check_supersolution, domination_check, lattice_check, perron_bracket)
from dynkinlab.core.solver import solve
from dynkinlab.data.models import SpatialGrid, TimeGrid
from dynkinlab.errors import ArgumentError

from . import test_data

QUICK = MartingaleConfig(n_paths=2_000, n_start_times=6, seed=0, n_steps=20)


def _drift_candidates():
    supers = [CandidateFunction.affine([-1.0], 2.0, Role.SUPERSOLUTION, name="phi1"),
              CandidateFunction.affine([-0.5], 1.5, Role.SUPERSOLUTION, name="phi2")]
    subs = [CandidateFunction.affine([1.0], -3.0, Role.SUBSOLUTION, name="psi1"),
            CandidateFunction.affine([0.5], -2.0, Role.SUBSOLUTION, name="psi2")]
    return supers, subs


def _solved_drift_case():
    model, problem, box = test_data.drift_only_case()
    grid = SpatialGrid.box(box[0], box[1], [61])
    return model, problem, box, solve(model, problem, grid, TimeGrid.uniform(0.0, 1.0, 50))


class TestConstants:
    """Constant functions are the trivial members of each class."""

    def test_upper_constant_is_a_supersolution(self):
        model, problem, _, _ = test_data.tanh_game()
        cand = CandidateFunction.upper_bound(problem)
        report = check_supersolution(cand, model, problem, ([-3.0], [3.0]), QUICK)
        assert report.passed
        assert report.n_start_times == QUICK.n_start_times
        # cand >= u everywhere, so every start stops at tau_1
        assert all(s.mean_increment == 0.0 and s.std_error == 0.0 for s in report.starts)

    def test_constant_below_the_lower_obstacle_fails(self):
        model, problem, _, _ = test_data.tanh_game()
        report = check_supersolution(CandidateFunction.constant(-2.0), model, problem, ([-3.0], [3.0]), QUICK)
        assert not report.passed
        assert report.pointwise_witness is not None
        assert report.starts == []

    def test_lower_constant_is_a_subsolution(self):
        model, problem, _, _ = test_data.tanh_game()
        report = check_subsolution(CandidateFunction.lower_bound(problem), model, problem, ([-3.0], [3.0]), QUICK)
        assert report.passed

    def test_constant_above_the_upper_obstacle_fails(self):
        model, problem, _, _ = test_data.tanh_game()
        report = check_subsolution(CandidateFunction.constant(2.0), model, problem, ([-3.0], [3.0]), QUICK)
        assert not report.passed
        assert len(report.pointwise_witness) == 2

    def test_bounds_are_required(self):
        model, problem, _, _ = test_data.explicit_case()
        with pytest.raises(ArgumentError):
            CandidateFunction.upper_bound(problem)


class TestSolvedValue:

    def test_heat_value_is_a_martingale(self):
        model, problem, grid, tgrid = test_data.heat_case(nodes=101, steps=100)
        v = solve(model, problem, grid, tgrid)
        cfg = MartingaleConfig(n_paths=20_000, n_start_times=4, seed=1, n_steps=50, pointwise_tol=5e-3)
        box = ([-3.0], [3.0])
        assert check_supersolution(CandidateFunction.from_grid(v, Role.SUPERSOLUTION), model, problem, box,
                                   cfg).passed
        assert check_subsolution(CandidateFunction.from_grid(v, Role.SUBSOLUTION), model, problem, box, cfg).passed

    @pytest.mark.slow
    def test_american_put_value_is_a_subsolution(self):
        model, problem, grid, tgrid = test_data.american_put_case(nodes=201, steps=200)
        v = solve(model, problem, grid, tgrid)
        cfg = MartingaleConfig(n_paths=50_000, n_start_times=8, seed=2, n_steps=50, pointwise_tol=5e-3,
                               contact_tol=5e-3, threads=4)
        report = check_subsolution(CandidateFunction.from_grid(v, Role.SUBSOLUTION), model, problem,
                                   ([0.5], [2.0]), cfg)
        assert report.passed, report.to_dict()

    def test_thread_count_does_not_change_the_verdict(self):
        model, problem, box = test_data.drift_only_case()
        cand = CandidateFunction.affine([-1.0], 2.0, Role.SUPERSOLUTION)
        serial = check_supersolution(cand, model, problem, box, QUICK)
        parallel = check_supersolution(cand, model, problem, box,
                                       MartingaleConfig(n_paths=2_000, n_start_times=6, seed=0, n_steps=20,
                                                        threads=3))
        assert [s.z_score for s in serial.starts] == [s.z_score for s in parallel.starts]
        assert [s.start_kind for s in serial.starts] == ["deterministic", "region_entry"] * 3


class TestLattice:

    @pytest.mark.parametrize("seed", range(5))
    def test_minimum_of_supersolutions(self, seed):
        model, problem, box = test_data.drift_only_case()
        supers, _ = _drift_candidates()
        cfg = MartingaleConfig(n_paths=5_000, n_start_times=8, seed=seed, n_steps=25)
        for cand in supers:
            assert check_supersolution(cand, model, problem, box, cfg).passed, cand.name
        report = lattice_check(supers[0], supers[1], model, problem, box, cfg)
        assert not report.skipped
        assert report.passed

    @pytest.mark.parametrize("seed", range(5))
    def test_maximum_of_subsolutions(self, seed):
        model, problem, box = test_data.drift_only_case()
        _, subs = _drift_candidates()
        cfg = MartingaleConfig(n_paths=5_000, n_start_times=8, seed=seed, n_steps=25)
        report = lattice_check(subs[0], subs[1], model, problem, box, cfg)
        assert report.passed

    def test_broken_precondition_skips(self):
        model, problem, box = test_data.drift_only_case()
        supers, _ = _drift_candidates()
        broken = CandidateFunction.constant(-5.0, Role.SUPERSOLUTION, "too_low")
        report = lattice_check(supers[0], broken, model, problem, box, QUICK)
        assert report.skipped
        assert not report.passed
        assert "too_low" in report.notes

    def test_roles_must_match(self):
        model, problem, box = test_data.drift_only_case()
        supers, subs = _drift_candidates()
        with pytest.raises(ArgumentError):
            lattice_check(supers[0], subs[0], model, problem, box, QUICK)


class TestAntisymmetry:

    def test_negated_candidate_on_the_swapped_problem(self):
        model, problem, grid, tgrid = test_data.tanh_game(nodes=81, steps=50)
        v = solve(model, problem, grid, tgrid)
        cand = CandidateFunction.from_grid(v, Role.SUPERSOLUTION)
        cfg = MartingaleConfig(n_paths=2_000, n_start_times=4, seed=9, n_steps=20, pointwise_tol=5e-3,
                               contact_tol=1e-3)
        box = ([-2.0], [2.0])
        direct = check_supersolution(cand, model, problem, box, cfg)
        mirrored = check_subsolution(cand.negated(), model, problem.swapped(), box, cfg)
        assert cand.negated().role is Role.SUBSOLUTION
        assert direct.passed == mirrored.passed
        assert [s.z_score for s in direct.starts] == [s.z_score for s in mirrored.starts]
        assert direct.violation_z_score == mirrored.violation_z_score


class TestDomination:

    def test_semi_solutions_bracket_the_drift_value(self):
        _, _, box, v = _solved_drift_case()
        supers, subs = _drift_candidates()
        for cand in supers + subs:
            report = domination_check(cand, v, box, tol=1e-6)
            assert report.passed, (cand.name, report.worst_margin)
        bracket = perron_bracket(supers, subs, v, box, tol=1e-6)
        assert bracket.passed
        assert bracket.bracket_width > 0.0

    def test_value_dominates_itself(self):
        model, problem, grid, tgrid = test_data.heat_case(nodes=41, steps=20)
        v = solve(model, problem, grid, tgrid)
        report = domination_check(CandidateFunction.from_grid(v, Role.SUPERSOLUTION), v, ([-3.0], [3.0]))
        assert report.passed
        assert report.worst_margin == 0.0

    def test_midpoint_constant_is_caught(self):
        model, problem, grid, tgrid = test_data.tanh_game(nodes=81, steps=50)
        v = solve(model, problem, grid, tgrid)
        m, M = problem.bounds
        cand = CandidateFunction.constant(0.5 * (m + M), Role.SUPERSOLUTION)
        report = domination_check(cand, v, ([-3.0], [3.0]))
        assert not report.passed
        assert report.witness[1] > 0.0

    def test_constant_bounds_bracket_the_game(self):
        model, problem, grid, tgrid = test_data.tanh_game(nodes=81, steps=50)
        v = solve(model, problem, grid, tgrid)
        supers = [CandidateFunction.upper_bound(problem)]
        subs = [CandidateFunction.lower_bound(problem)]
        assert perron_bracket(supers, subs, v, ([-3.0], [3.0])).passed
        too_low = [CandidateFunction.constant(0.0, Role.SUPERSOLUTION)]
        assert not perron_bracket(too_low, subs, v, ([-3.0], [3.0])).passed

    def test_role_is_required(self):
        _, _, box, v = _solved_drift_case()
        with pytest.raises(ArgumentError):
            domination_check(CandidateFunction.constant(1.0), v, box)
