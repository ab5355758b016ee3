import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from woagame.analytics import discounted_two_sided_exit
from woagame.engine import Game, payoff_values
from woagame.errors import BandTooWide
from woagame.model import DiffusionModel, PayoffSpec, brownian, build_grid, constant
from woagame.montecarlo import (PLAYER1, _grid_lowering, EstimateWithError, SimConfig, euler_race,
                                local_time_estimate, mc_payoff, mc_payoff_profile,
                                simulate_embedded_chain, simulate_euler, tie_probability)
from woagame.solver import stopped_distribution
from woagame.stopping import MRST, StrategyProfile

from conftest import bump_payoffs

NEVER = MRST(0, 1, ((0, 1),))


def _within(freq, p, n, k):
    se = np.sqrt(np.maximum(p * (1 - p), 1e-300) / n)
    return np.all(np.abs(freq - p) <= k * se + 1e-12)


@pytest.fixture(scope="module")
def game3(bm):
    return Game(bm, bump_payoffs(), build_grid(bm, 3))


def test_chain_without_stopping_splits_evenly(game3):
    s = simulate_embedded_chain(game3, StrategyProfile.zeros(game3.grid), 2, 20_000, 1)
    freq = np.mean(s.stop_index == 4)
    assert abs(freq - 0.5) <= 4 * math.sqrt(0.25 / 20_000)
    assert set(np.unique(s.stop_index)) == {0, 4}


def test_chain_infinite_own_rate_stops_at_start(game3):
    prof = StrategyProfile(game3.grid, [0, 1, 0], [0, 0, 0])
    s = simulate_embedded_chain(game3, prof, 2, 1000, 1)
    assert np.all(s.stop_index == 2) and np.all(s.cause == PLAYER1)


def test_chain_one_atom_matches_stopped_law(game3):
    prof = StrategyProfile.from_rates(game3.grid, [0, 2.0, 0], [0, 0, 0])
    n = 100_000
    s = simulate_embedded_chain(game3, prof, 2, n, 7)
    law = stopped_distribution(game3, prof, 2)
    freq = np.bincount(s.stop_index, minlength=5) / n
    assert _within(freq, law.probs, n, 3)


def test_chain_memorylessness(game3, bm):
    # paths passing through x = 0.25 without stopping there stop like fresh starts
    prof = StrategyProfile.from_rates(game3.grid, [0.5, 2.0, 0.3], [0.4, 0, 1.5])
    n = 100_000
    s = simulate_embedded_chain(game3, prof, 2, n, 11, watch=1)
    via = s.stop_index[s.visited]
    fresh = stopped_distribution(game3, prof, 1).probs
    freq = np.bincount(via, minlength=5) / via.size
    assert via.size > 10_000
    assert _within(freq, fresh, via.size, 4)


def test_chain_is_seed_deterministic(game3):
    prof = StrategyProfile(game3.grid, [0.3, 0.2, 0.1], [0.1, 0.2, 0.3])
    a = simulate_embedded_chain(game3, prof, 2, 40_000, 5)
    b = simulate_embedded_chain(game3, prof, 2, 40_000, 5)
    np.testing.assert_array_equal(a.stop_index, b.stop_index)
    np.testing.assert_array_equal(a.disc1, b.disc1)


def test_chain_payoffs_match_engine(game3):
    prof = StrategyProfile(game3.grid, [0.3, 0.6, 0.1], [0.1, 0.5, 0.7])
    e1, e2 = mc_payoff_profile(game3, prof, 2, SimConfig(n_paths=100_000, rng_seed=3))
    vals = payoff_values(game3, prof)
    assert abs(e1.mean - vals.w1[2]) <= 3 * e1.std_error
    assert abs(e2.mean - vals.w2[2]) <= 3 * e2.std_error


def test_euler_deterministic_ramp():
    stub = DiffusionModel(-1.0, 1.0, constant(1.0), constant(0.0), "stub")
    p = simulate_euler(stub, 0.0, 0.1, 2.0, 0)
    np.testing.assert_allclose(p.states[0, :11], np.linspace(0, 1, 11), atol=1e-12)
    assert np.all(p.states[0, 12:] == 1.0)


def test_euler_absorbed_paths_stay_put(bm):
    p = simulate_euler(bm, 0.5, 1e-3, 3.0, 4, n_paths=50)
    for row in p.states:
        hit = np.flatnonzero((row <= 0) | (row >= 1))
        if hit.size:
            assert np.all(row[hit[0]:] == row[hit[0]])


def test_euler_bitwise_reproducible(bm):
    a = simulate_euler(bm, 0.5, 1e-3, 1.0, 9, n_paths=4)
    b = simulate_euler(bm, 0.5, 1e-3, 1.0, 9, n_paths=4)
    assert a.states.tobytes() == b.states.tobytes()


def test_local_time_outside_band_is_zero(bm):
    lt = local_time_estimate(np.arange(4.0), np.array([0.1, 0.2, 0.15, 0.1]), 0.7, 0.05, bm)
    np.testing.assert_array_equal(lt, 0.0)
    with pytest.raises(BandTooWide):
        local_time_estimate(np.arange(2.0), np.array([0.1, 0.2]), 0.99, 0.02, bm)


@pytest.mark.slow
def test_local_time_mean_matches_reflection_formula():
    # E l^0_1 = E|B_1| = sqrt(2/pi) for standard BM (interval wide enough not to matter)
    wide = brownian(-10.0, 10.0)
    totals = []
    for k in range(10):
        p = simulate_euler(wide, 0.0, 1e-4, 1.0, np.random.default_rng(k), 1000)
        totals.append(local_time_estimate(p.times, p.states, 0.0, 1e-2, wide)[:, -1])
    mean = np.concatenate(totals).mean()
    assert abs(mean / math.sqrt(2 / math.pi) - 1) <= 0.05


def test_race_band_must_resolve_atoms(bm):
    m = MRST(0, 1, ((0, 1),), ((0.5, 1.0), (0.52, 1.0)))
    with pytest.raises(BandTooWide):
        euler_race(bm, m, NEVER, 0.5, SimConfig(n_paths=10, band_epsilon=0.02, mode="euler"))


def test_immediate_stopper_gets_g(bm):
    pay = bump_payoffs()
    empty = MRST(0, 1, ())
    e1, _, _ = mc_payoff(bm, pay, empty, NEVER, 0.3, SimConfig(n_paths=500, mode="euler"))
    assert e1.mean == pytest.approx(pay.g1(0.3), abs=1e-15) and e1.std_error < 1e-15


def test_no_voluntary_stops_gives_exit_average(bm):
    g = lambda x: 1 + np.asarray(x, float)
    pay = PayoffSpec(g, lambda x: g(x) + np.sin(np.pi * x), g, g, 0.0, 0.0)
    e1, _, _ = mc_payoff(bm, pay, NEVER, NEVER, 0.3, SimConfig(n_paths=100_000, rng_seed=2))
    e_low, e_up = discounted_two_sided_exit(bm, 0.0, 0, 0.3, 1)
    assert abs(e1.mean - (e_low * 1 + e_up * 2)) <= 3 * e1.std_error


def test_grid_mrsts_are_lowered_to_the_chain(bm):
    pay = bump_payoffs()
    m1 = MRST(0, 1, ((0, 1),), ((0.25, 1.0), (0.5, 3.0)))
    m2 = MRST(0, 1, ((0, 0.75), (0.75, 1)), ((0.5, 0.5),))
    e1, e2, short = mc_payoff(bm, pay, m1, m2, 0.5, SimConfig(n_paths=100_000, rng_seed=4))
    game = Game(bm, pay, build_grid(bm, 3))
    prof = StrategyProfile.from_rates(game.grid, [1.0, 3.0, 0.0], [0.0, 0.5, math.inf])
    vals = payoff_values(game, prof)
    assert short == 0
    assert abs(e1.mean - vals.w1[2]) <= 3 * e1.std_error
    assert abs(e2.mean - vals.w2[2]) <= 3 * e2.std_error


def test_tie_probability_double_infinite_start(bm):
    removed = MRST(0, 1, ((0, 0.5), (0.5, 1)))
    est = tie_probability(bm, removed, removed, 0.5, SimConfig(n_paths=200, mode="euler"))
    assert est.mean == 1.0
    est = tie_probability(bm, removed, removed, 0.5, SimConfig(n_paths=200))
    assert est.mean == 1.0


def test_tie_probability_embedded_finite_rates_is_zero(bm):
    m1 = MRST(0, 1, ((0, 1),), ((0.5, 3.0),))
    est = tie_probability(bm, m1, m1, 0.5, SimConfig(n_paths=50_000))
    assert est.mean == 0.0


@pytest.mark.slow
def test_euler_and_chain_agree_on_stop_locations(bm):
    m1 = MRST(0, 1, ((0, 1),), ((0.5, 2.0),))
    race = euler_race(bm, m1, NEVER, 0.5, SimConfig(n_paths=20_000, dt=1e-4, mode="euler",
                                                      rng_seed=1), until="first")
    game = Game(bm, bump_payoffs(), build_grid(bm, 1))
    law = stopped_distribution(game, StrategyProfile.from_rates(game.grid, [2.0], [0.0]), 1)
    freq = np.array([np.mean(race.x1 == v) for v in game.grid.points])
    assert _within(freq, law.probs, race.x1.size, 4)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.integers(1, 29))
def test_estimate_merge_equals_pooled(xs, cut):
    xs = np.array(xs)
    cut = min(cut, xs.size - 1)
    merged = EstimateWithError.from_samples(xs[:cut]).merge(EstimateWithError.from_samples(xs[cut:]))
    pooled = EstimateWithError.from_samples(xs)
    assert merged.n == pooled.n
    assert merged.mean == pytest.approx(pooled.mean, abs=1e-12)
    assert merged.std_error == pytest.approx(pooled.std_error, rel=1e-9, abs=1e-12)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(mode="exact")


def test_gapped_continuation_sets_are_lowered(bm):
    m1 = MRST(0, 1, ((0.0, 0.6), (0.8, 1.0)), ((0.3, 2.0),))
    grid, prof = _grid_lowering(bm, m1, NEVER, 0.5)
    np.testing.assert_array_equal(grid.interior, [0.3, 0.5, 0.6, 0.8])
    np.testing.assert_allclose(prof.units(1), [2 / 3, 0, 1, 1])
    np.testing.assert_array_equal(prof.units(2), 0)


@pytest.mark.slow
def test_gapped_lowering_matches_euler_stop_locations(bm):
    # Euler discretisation bias is O(sqrt(dt)), hence the extra 1e-2 slack
    m1 = MRST(0, 1, ((0.0, 0.8),), ((0.3, 2.0),))
    n = 20_000
    race = euler_race(bm, m1, NEVER, 0.5, SimConfig(n_paths=n, mode="euler", rng_seed=3),
                      until="first")
    grid, prof = _grid_lowering(bm, m1, NEVER, 0.5)
    game = Game(bm, bump_payoffs(), grid)
    law = stopped_distribution(game, prof, grid.index_of(0.5))
    for x in (0.0, 0.3, 0.8):
        p = law.probs[grid.index_of(x)]
        p_euler = np.mean(race.x1 == x)
        assert abs(p_euler - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-2, (x, p, p_euler)
