import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from woagame.engine import Game, complementarity_residual
from woagame.errors import NonNestedSchedule, NonProbabilityInput, NotConverged
from woagame.model import PayoffSpec, build_grid, uniform_schedule
from woagame.oracle import one_point_equilibrium
from woagame.solver import (SolverOptions, distribution_distance, inject, refine_and_solve,
                            solve_grid_equilibrium, stopped_distribution)
from woagame.stopping import StrategyProfile

from conftest import bump_payoffs, wave


def trivial_payoffs():
    return PayoffSpec(wave, wave, wave, wave, 0.1, 0.1)


def test_trivial_game_stops_everywhere_with_zero_residual(bm):
    game = Game(bm, trivial_payoffs(), build_grid(bm, 9))
    prof = StrategyProfile(game.grid, np.ones(9), np.ones(9))
    assert complementarity_residual(game, prof).sup == 0.0
    res = solve_grid_equilibrium(game)
    assert res.converged and res.residual_max <= 1e-8


def test_symmetric_instance_gives_symmetric_profile(sym_game, sym_solution):
    u1, u2 = sym_solution.profile.units1, sym_solution.profile.units2
    assert sym_solution.residual_max <= 1e-8
    assert np.max(np.abs(u1 - u2)) <= 1e-8
    assert np.max(np.abs(u1 - u1[::-1])) <= 1e-8


def test_one_point_matches_bisection(bm):
    pay = bump_payoffs()
    res = solve_grid_equilibrium(Game(bm, pay, build_grid(bm, 1)))
    sol = one_point_equilibrium(bm, pay)
    assert abs(res.profile.units1[0] - sol.units1) <= 1e-8
    assert abs(res.profile.units2[0] - sol.units2) <= 1e-8


def test_certificate_is_reproducible(asym_game, asym_solution):
    again = complementarity_residual(asym_game, asym_solution.profile)
    assert again.sup == pytest.approx(asym_solution.residual_max, abs=1e-12)


def test_damped_phase_alone_converges(bm):
    game = Game(bm, bump_payoffs(), build_grid(bm, 5))
    opts = SolverOptions(newton_enabled=False, max_outer_iterations=3000)
    res = solve_grid_equilibrium(game, opts)
    assert res.converged
    assert "active-set" not in res.method_trace


def test_not_converged_carries_best_profile(asym_game):
    opts = SolverOptions(newton_enabled=False, max_outer_iterations=2, restart_seeds=0)
    with pytest.raises(NotConverged) as info:
        solve_grid_equilibrium(asym_game, opts)
    assert info.value.best is not None and np.isfinite(info.value.best_residual)


def test_solver_is_deterministic(asym_game):
    opts = SolverOptions(newton_enabled=False, max_outer_iterations=400, rng_seed=9)
    try:
        a = solve_grid_equilibrium(asym_game, opts)
        b = solve_grid_equilibrium(asym_game, opts)
    except NotConverged as exc:
        pytest.fail(str(exc))
    np.testing.assert_array_equal(a.profile.units1, b.profile.units1)
    assert a.residual_history == b.residual_history


def test_refinement_on_trivial_game_has_zero_distances(bm):
    rep = refine_and_solve(bm, trivial_payoffs(), uniform_schedule(bm, 3))
    assert [lv.size - 2 for lv in rep.levels] == [1, 3, 7]
    assert rep.value_distances == [0.0, 0.0]
    assert rep.law_distances == [0.0, 0.0]


def test_non_nested_schedule_rejected(bm):
    with pytest.raises(NonNestedSchedule):
        refine_and_solve(bm, trivial_payoffs(), [build_grid(bm, 2), build_grid(bm, 3)])


def test_inject_keeps_coarse_rates(bm):
    coarse = StrategyProfile(build_grid(bm, 3), [0.1, 0.2, 0.3], [0.4, 0.5, 0.6])
    fine = inject(coarse, build_grid(bm, 7))
    np.testing.assert_array_equal(fine.units1, [0, 0.1, 0, 0.2, 0, 0.3, 0])
    np.testing.assert_array_equal(fine.units2[1::2], coarse.units2)


def test_stopped_distribution_examples(bm):
    game = Game(bm, bump_payoffs(), build_grid(bm, 3))
    law = stopped_distribution(game, StrategyProfile.zeros(game.grid), 0.5)
    np.testing.assert_allclose(law.probs, [0.5, 0, 0, 0, 0.5], atol=1e-12)
    prof = StrategyProfile(game.grid, [0, 1, 0], [0, 0, 0])
    law = stopped_distribution(game, prof, 2, which=1)
    np.testing.assert_array_equal(law.probs, [0, 0, 1, 0, 0])
    assert law.by_cause["player1"][2] == 1.0


def _w1_by_coupling(xa, pa, xb, pb):
    """Optimal transport LP over all couplings."""
    cost = np.abs(np.subtract.outer(xa, xb)).ravel()
    na, nb = len(xa), len(xb)
    rows = [np.kron(np.eye(na)[i], np.ones(nb)) for i in range(na)]
    cols = [np.kron(np.ones(na), np.eye(nb)[j]) for j in range(nb)]
    res = linprog(cost, A_eq=np.array(rows + cols), b_eq=np.concatenate([pa, pb]), bounds=(0, None))
    return res.fun


def test_distance_examples():
    pts = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    law = (pts, np.array([0.2, 0.2, 0.2, 0.2, 0.2]))
    assert distribution_distance(law, law) == 0.0
    assert distribution_distance(([0.0], [1.0]), ([1.0], [1.0])) == 1.0
    d = distribution_distance(([0.5], [1.0]), ([0.25, 0.75], [0.5, 0.5]))
    assert d == pytest.approx(0.25, abs=1e-15)
    assert _w1_by_coupling(np.array([0.5]), [1.0], np.array([0.25, 0.75]), [0.5, 0.5]) == pytest.approx(0.25)
    with pytest.raises(NonProbabilityInput):
        distribution_distance(([0.0, 1.0], [0.5, 0.6]), ([0.0], [1.0]))


@given(st.lists(st.floats(0.01, 1), min_size=4, max_size=4),
       st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_distance_matches_coupling_lp(pa, pb):
    xa, xb = np.array([0.0, 0.2, 0.5, 1.0]), np.array([0.1, 0.5, 0.9])
    pa, pb = np.array(pa) / sum(pa), np.array(pb) / sum(pb)
    assert distribution_distance((xa, pa), (xb, pb)) == pytest.approx(_w1_by_coupling(xa, pa, xb, pb),
                                                                      abs=1e-8)
