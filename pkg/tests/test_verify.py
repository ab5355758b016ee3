import json

import numpy as np

from woagame import analytics
from woagame.engine import Game
from woagame.model import PayoffSpec, build_grid, uniform_schedule
from woagame.montecarlo import SimConfig
from woagame.solver import RefinementLevel, RefinementReport, refine_and_solve
from woagame.stopping import StrategyProfile
from woagame.verify import (FAIL, PASS, SKIPPED, certify_equilibrium, cross_validate,
                            deviation_sweep, refinement_diagnostics)

from conftest import asym_payoffs, wave


def test_solver_output_is_certified(asym_game, asym_solution):
    rep = certify_equilibrium(asym_game, asym_solution.profile)
    assert rep.overall, rep.to_dict()
    assert {c.name for c in rep.checks} == {"residual", "value_optimality1", "value_optimality2",
                                            "deviation_sweep1", "deviation_sweep2", "nonstop"}
    json.dumps(rep.to_dict(), allow_nan=False)


def test_perturbed_profile_fails_with_witness(asym_game, asym_solution):
    u1 = asym_solution.profile.units(1).copy()
    j = int(np.argmax(u1 > 0)) if np.any(u1 > 0) else 4
    u1[j] = 0.5 * u1[j] if u1[j] > 0 else 0.3
    bad = StrategyProfile(asym_game.grid, u1, asym_solution.profile.units(2))
    rep = certify_equilibrium(asym_game, bad)
    chk = rep.get("residual")
    assert not rep.overall and chk.status == FAIL
    assert chk.measured > 1e-6 and chk.witness["player"] in (1, 2)


def test_deviation_sweep_finds_profitable_stop(bm):
    # g > f-continuation everywhere in the middle: never stopping is a mistake
    game = Game(bm, PayoffSpec(lambda x: 1 + np.sin(np.pi * x), lambda x: 1 + 1.2 * np.sin(np.pi * x),
                               lambda x: 1 + np.sin(np.pi * x), lambda x: 1 + 1.2 * np.sin(np.pi * x),
                               0.5, 0.5), build_grid(bm, 5))
    gain, who = deviation_sweep(game, StrategyProfile.zeros(game.grid), 1)
    assert gain > 1e-3 and who


def test_nonstop_violation_is_reported(bm):
    game = Game(bm, asym_payoffs(), build_grid(bm, 5))
    ones = np.ones(5)
    rep = certify_equilibrium(game, StrategyProfile(game.grid, ones, ones))
    chk = rep.get("nonstop")
    assert chk.status == FAIL and chk.measured == 10


def test_cross_validation_passes_on_equilibrium(asym_game, asym_solution):
    rep = cross_validate(asym_game, asym_solution.profile, SimConfig(n_paths=50_000, rng_seed=1))
    assert rep.overall, [c for c in rep.checks if c.status == FAIL]
    assert all(c.status == PASS for c in rep.checks)


def test_cross_validation_small_samples_are_skipped(asym_game, asym_solution):
    rep = cross_validate(asym_game, asym_solution.profile, SimConfig(n_paths=100))
    payoff = [c for c in rep.checks if c.name.startswith("payoff")]
    assert payoff and all(c.status == SKIPPED for c in payoff)
    assert "underpowered" in payoff[0].witness


def test_cross_validation_catches_wrong_sign_kernel(monkeypatch, asym_game, asym_solution):
    monkeypatch.setattr(analytics, "_JUMP_SIGN", -1.0)
    rep = cross_validate(asym_game, asym_solution.profile, SimConfig(n_paths=100))
    assert rep.get("analytic_engine").status == FAIL and not rep.overall


def test_refinement_of_trivial_game_passes(bm):
    g = lambda x: wave(x)
    rep = refine_and_solve(bm, PayoffSpec(g, g, g, g, 0.1, 0.1), uniform_schedule(bm, 4))
    assert rep.value_distances[-1] < 1e-12
    diag = refinement_diagnostics(rep)
    assert diag.overall and all(c.status == PASS for c in diag.checks)


def _synthetic(values, laws):
    levels = [RefinementLevel(None, None)]
    levels += [RefinementLevel(None, None, v, w) for v, w in zip(values, laws)]
    return RefinementReport(levels)


def test_refinement_diagnostics_logic():
    good = refinement_diagnostics(_synthetic([0.3, 0.1, 0.005], [0.2, 0.2, 0.1]))
    assert good.overall
    rising = refinement_diagnostics(_synthetic([0.3, 0.4, 0.005], [0.2, 0.1, 0.3]))
    assert rising.get("value_decreasing").witness == {"level": 2}
    assert rising.get("law_decreasing").witness == {"level": 3}
    far = refinement_diagnostics(_synthetic([0.3, 0.2, 0.1], [0.2, 0.1, 0.05]))
    assert far.get("value_final").status == FAIL


def test_refinement_needs_three_levels():
    rep = refinement_diagnostics(_synthetic([0.1], [0.1]))
    assert {c.status for c in rep.checks} == {SKIPPED} and rep.overall


def test_failed_level_is_reported():
    rep = _synthetic([0.3, 0.1], [0.1, 0.1])
    rep.levels[2].error = "did not converge"
    diag = refinement_diagnostics(rep)
    assert diag.get("levels_solved").witness["level"] == 2 and not diag.overall
