import numpy as np
import pytest
from hypothesis import given, strategies as st

from woagame.errors import (AssumptionError, DuplicatePoints, NonNestedSchedule,
                            NonPositiveVolatility, PointOutsideInterval, UnboundedInterval)
from woagame.model import (DiffusionModel, PayoffSpec, brownian, build_grid, build_model,
                           check_nested, constant, refine_grid, uniform_schedule,
                           validate_assumptions)


def test_builtin_families():
    xs = np.linspace(0, 1, 7)
    bm = build_model({"family": "BM", "interval": [0, 1], "params": {"sigma": 1.0}})
    np.testing.assert_array_equal(bm.mu(xs), 0.0)
    np.testing.assert_array_equal(bm.sigma(xs), 1.0)
    ou = build_model({"family": "OU", "interval": [0, 1],
                      "params": {"theta": 2, "m": 0.5, "sigma": 0.3}})
    np.testing.assert_allclose(ou.mu(xs), 2 * (0.5 - xs))
    np.testing.assert_allclose(ou.sigma(xs), 0.3)
    xs = np.linspace(0.5, 2, 7)
    gbm = build_model({"family": "GBM", "interval": [0.5, 2], "params": {"mu": 0.05, "sigma": 0.2}})
    np.testing.assert_allclose(gbm.mu(xs), 0.05 * xs)
    np.testing.assert_allclose(gbm.sigma(xs), 0.2 * xs)


def test_model_rejects_bad_coefficients():
    with pytest.raises(NonPositiveVolatility):
        brownian(0, 1, sigma=0.0).validate()
    with pytest.raises(UnboundedInterval):
        build_model({"family": "BM", "interval": [0, np.inf]})
    m = DiffusionModel(0.0, 1.0, constant(0.0), lambda x: 1.0 - x, "custom")
    with pytest.raises(NonPositiveVolatility):
        m.validate()


def _payoffs(g, f):
    return PayoffSpec(g, f, g, f, 0.1, 0.1)


def test_assumptions_pass_for_a_plain_woa():
    one = lambda x: np.ones_like(x)
    f = lambda x: np.where((x > 0) & (x < 1), 2.0, 1.0)
    rep = validate_assumptions(brownian(), _payoffs(one, f))
    assert rep.ok


def test_assumption_a_failure_has_witness():
    g = lambda x: np.asarray(x, float)
    f = lambda x: np.where((x > 0.2) & (x < 0.4), x - 0.1, x)
    rep = validate_assumptions(brownian(), _payoffs(g, f))
    bad = {c.name: c for c in rep.failures()}
    assert "A1:g<=f" in bad
    assert 0.2 < bad["A1:g<=f"].worst_point < 0.4
    with pytest.raises(AssumptionError):
        rep.raise_if_failed()


def test_assumption_c_failure_at_boundary():
    one = lambda x: np.ones_like(x)
    f = lambda x: np.where(x == 0.0, 1.5, 1.0)
    rep = validate_assumptions(brownian(), _payoffs(one, f))
    bad = {c.name: c for c in rep.failures()}
    assert bad["C1:g=f-at-boundary"].worst_point == 0.0


def test_grid_examples():
    bm = brownian()
    g = build_grid(bm, 1)
    np.testing.assert_array_equal(g.points, [0, 0.5, 1])
    np.testing.assert_array_equal(refine_grid(g).points, [0, 0.25, 0.5, 0.75, 1])
    with pytest.raises(DuplicatePoints):
        build_grid(bm, placement=[0, 0.3, 0.3, 1])
    with pytest.raises(PointOutsideInterval):
        build_grid(bm, placement=[0.3, 1.2])


def test_chebyshev_grid_is_sorted_and_inside():
    g = build_grid(brownian(), 9, "chebyshev")
    assert g.n_interior == 9
    assert np.all(np.diff(g.points) > 0)


@given(st.integers(1, 4), st.integers(2, 6))
def test_uniform_schedule_is_nested_and_halves_spacing(n0, levels):
    sched = uniform_schedule(brownian(), levels, n0)
    check_nested(sched)
    for a, b in zip(sched, sched[1:]):
        assert b.max_spacing == pytest.approx(a.max_spacing / 2)


def test_non_nested_schedule_rejected():
    bm = brownian()
    with pytest.raises(NonNestedSchedule):
        check_nested([build_grid(bm, 2), build_grid(bm, 3)])
