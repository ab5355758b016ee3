"""Diffusion driver, payoff data and grids.

The state process is a one-dimensional diffusion ``dX = mu(X) dt + sigma(X) dW``
on a compact interval ``[lower, upper]`` with both endpoints absorbing.
Coefficient and payoff functions are vectorised callables ``f(x) -> array``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    AssumptionError,
    DuplicatePoints,
    NonFiniteCoefficient,
    NonNestedSchedule,
    NonPositiveVolatility,
    PointOutsideInterval,
    UnboundedInterval,
)

Func = Callable[[np.ndarray], np.ndarray]

BOUNDARY_TOL = 1e-12
DEFAULT_LIPSCHITZ_LIMIT = 1e8


def _vectorize(fn: Func) -> Func:
    """Wrap ``fn`` so that scalars and arrays both come back as float arrays."""

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(fn(x), dtype=float)
        if out.shape != x.shape:
            out = np.broadcast_to(out, x.shape).copy()
        return out

    return wrapped


def constant(value: float) -> Func:
    return lambda x: np.full(np.shape(x), float(value))


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """Diffusion on ``[lower_bound, upper_bound]`` absorbed at both ends.

    The constructor does not validate; use :func:`build_model` or
    :meth:`validate` for checked instances.
    """

    lower_bound: float
    upper_bound: float
    drift: Func
    volatility: Func
    family: str = "custom"
    params: Mapping[str, object] = field(default_factory=dict)
    boundary_behavior: str = "absorbing"

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower_bound + self.upper_bound)

    @property
    def length(self) -> float:
        return self.upper_bound - self.lower_bound

    def mu(self, x):
        return _vectorize(self.drift)(x)

    def sigma(self, x):
        return _vectorize(self.volatility)(x)

    def validate(self, mesh_points: int = 2001,
                 lipschitz_limit: float = DEFAULT_LIPSCHITZ_LIMIT) -> "DiffusionModel":
        lo, hi = self.lower_bound, self.upper_bound
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise UnboundedInterval(f"interval [{lo}, {hi}] must be finite")
        if not lo < hi:
            raise UnboundedInterval(f"need lower < upper, got [{lo}, {hi}]")
        if self.boundary_behavior != "absorbing":
            raise UnboundedInterval("only absorbing boundaries are supported")
        x = np.linspace(lo, hi, mesh_points)
        mu, sig = self.mu(x), self.sigma(x)
        for name, vals in (("drift", mu), ("volatility", sig)):
            bad = ~np.isfinite(vals)
            if bad.any():
                raise NonFiniteCoefficient(
                    f"{name} is not finite at x={x[np.argmax(bad)]!r}")
        if sig.min() <= 0.0:
            raise NonPositiveVolatility(
                f"volatility {sig.min()!r} <= 0 at x={x[np.argmin(sig)]!r}")
        dx = np.diff(x)
        for name, vals in (("drift", mu), ("volatility", sig)):
            lip = np.max(np.abs(np.diff(vals)) / dx)
            if lip > lipschitz_limit:
                raise NonFiniteCoefficient(
                    f"{name} Lipschitz estimate {lip:.3g} exceeds {lipschitz_limit:.3g}")
        return self


def brownian(lower: float = 0.0, upper: float = 1.0, sigma: float = 1.0,
             mu: float = 0.0) -> DiffusionModel:
    return DiffusionModel(lower, upper, constant(mu), constant(sigma), "BM",
                          {"sigma": float(sigma), "mu": float(mu)})


def ornstein_uhlenbeck(lower: float, upper: float, theta: float, m: float,
                       sigma: float) -> DiffusionModel:
    return DiffusionModel(lower, upper, lambda x: theta * (m - x), constant(sigma),
                          "OU", {"theta": float(theta), "m": float(m), "sigma": float(sigma)})


def geometric_brownian(lower: float, upper: float, mu: float,
                       sigma: float) -> DiffusionModel:
    return DiffusionModel(lower, upper, lambda x: mu * x, lambda x: sigma * x,
                          "GBM", {"mu": float(mu), "sigma": float(sigma)})


def tabulated(lower: float, upper: float, x: Sequence[float], mu: Sequence[float],
              sigma: Sequence[float]) -> DiffusionModel:
    """Piecewise-linear coefficients through the given nodes."""
    xs = np.asarray(x, float)
    mus = np.asarray(mu, float)
    sigs = np.asarray(sigma, float)
    if not (xs.shape == mus.shape == sigs.shape) or xs.size < 2:
        raise NonFiniteCoefficient("tabulated coefficients need matching arrays of length >= 2")
    if np.any(np.diff(xs) <= 0):
        raise NonFiniteCoefficient("tabulated nodes must be strictly increasing")
    return DiffusionModel(
        lower, upper,
        lambda t: np.interp(t, xs, mus), lambda t: np.interp(t, xs, sigs),
        "tabulated", {"x": xs.tolist(), "mu": mus.tolist(), "sigma": sigs.tolist()})


_FAMILIES = {
    "BM": lambda lo, hi, p: brownian(lo, hi, p.get("sigma", 1.0), p.get("mu", 0.0)),
    "OU": lambda lo, hi, p: ornstein_uhlenbeck(lo, hi, p["theta"], p["m"], p["sigma"]),
    "GBM": lambda lo, hi, p: geometric_brownian(lo, hi, p["mu"], p["sigma"]),
    "tabulated": lambda lo, hi, p: tabulated(lo, hi, p["x"], p["mu"], p["sigma"]),
}


def build_model(raw: Mapping[str, object]) -> DiffusionModel:
    """Build and validate a model from a plain mapping.

    ``raw`` has keys ``family`` (BM, OU, GBM or tabulated), ``interval``
    ``[lower, upper]`` and ``params`` holding the family parameters.
    """
    family = raw["family"]
    if family not in _FAMILIES:
        raise KeyError(f"unknown model family {family!r}")
    lo, hi = (float(v) for v in raw["interval"])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise UnboundedInterval(f"interval [{lo}, {hi}] must be finite")
    params = dict(raw.get("params", {}))
    return _FAMILIES[family](lo, hi, params).validate()


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """Stop payoffs ``g_i``, follower payoffs ``f_i`` and discount rates."""

    g1: Func
    f1: Func
    g2: Func
    f2: Func
    r1: float
    r2: float
    source: Mapping[str, str] = field(default_factory=dict)

    def g(self, player: int):
        return _vectorize(self.g1 if player == 1 else self.g2)

    def f(self, player: int):
        return _vectorize(self.f1 if player == 1 else self.f2)

    def r(self, player: int) -> float:
        return float(self.r1 if player == 1 else self.r2)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    worst_point: float | None = None
    worst_value: float | None = None
    note: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def raise_if_failed(self) -> None:
        if not self.ok:
            msg = "; ".join(
                f"{c.name} fails at x={c.worst_point!r} ({c.worst_value:.3g})"
                for c in self.failures())
            raise AssumptionError(msg, self)


def validate_assumptions(model: DiffusionModel, payoffs: PayoffSpec,
                         mesh_density: int = 1001,
                         grid: "Grid | None" = None) -> ValidationReport:
    """Check the standing assumptions on a sampling mesh.

    Checks (A) ``g_i <= f_i``, nonnegativity, (C) ``g_i = f_i`` at both
    endpoints and (B) the model itself. Zero discount rates pass but are
    flagged in the note, since absorption then carries the whole argument.
    """
    lo, hi = model.lower_bound, model.upper_bound
    x = np.linspace(lo, hi, max(int(mesh_density), 3))
    if grid is not None:
        x = np.union1d(x, grid.points)
    checks = []
    try:
        model.validate()
        checks.append(AssumptionCheck("B:absorbing-compact", True))
    except (NonPositiveVolatility, UnboundedInterval, NonFiniteCoefficient) as exc:
        checks.append(AssumptionCheck("B:absorbing-compact", False, note=str(exc),
                                      worst_value=float("nan")))
    ends = np.array([lo, hi])
    for i in (1, 2):
        g, f = payoffs.g(i)(x), payoffs.f(i)(x)
        finite = np.isfinite(g) & np.isfinite(f)
        if not finite.all():
            k = int(np.argmin(finite))
            checks.append(AssumptionCheck(f"finite{i}", False, float(x[k]), float("nan")))
            continue
        gap = g - f
        k = int(np.argmax(gap))
        checks.append(AssumptionCheck(f"A{i}:g<=f", bool(gap[k] <= 0.0), float(x[k]), float(gap[k])))
        low = np.minimum(g, f)
        k = int(np.argmin(low))
        checks.append(AssumptionCheck(f"nonnegative{i}", bool(low[k] >= 0.0), float(x[k]), float(low[k])))
        bgap = np.abs(payoffs.g(i)(ends) - payoffs.f(i)(ends))
        k = int(np.argmax(bgap))
        checks.append(AssumptionCheck(f"C{i}:g=f-at-boundary", bool(bgap[k] <= BOUNDARY_TOL),
                                      float(ends[k]), float(bgap[k])))
        r = payoffs.r(i)
        checks.append(AssumptionCheck(
            f"discount{i}", bool(r >= 0.0 and math.isfinite(r)), None, r,
            note="zero discount: relies on a.s. absorption" if r == 0.0 else ""))
    return ValidationReport(tuple(checks))


# grids ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing grid containing both interval endpoints."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __len__(self):
        return self.points.size

    @property
    def n_interior(self) -> int:
        return self.points.size - 2

    @property
    def interior(self) -> np.ndarray:
        return self.points[1:-1]

    @property
    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.points.size, bool)
        mask[[0, -1]] = False
        return mask

    @property
    def max_spacing(self) -> float:
        return float(np.diff(self.points).max())

    def index_of(self, x: float) -> int:
        k = int(np.searchsorted(self.points, x))
        if k < self.points.size and self.points[k] == x:
            return k
        raise PointOutsideInterval(f"{x!r} is not a grid point")

    def issubset(self, other: "Grid") -> bool:
        return bool(np.all(np.isin(self.points, other.points)))


def _checked_grid(model: DiffusionModel, pts: Sequence[float]) -> Grid:
    lo, hi = model.lower_bound, model.upper_bound
    pts = np.asarray(pts, float)
    if np.any((pts < lo) | (pts > hi)) or not np.all(np.isfinite(pts)):
        raise PointOutsideInterval(f"grid points must lie in [{lo}, {hi}]")
    srt = np.sort(pts)
    if np.any(np.diff(srt) == 0.0):
        dup = srt[1:][np.diff(srt) == 0.0][0]
        raise DuplicatePoints(f"duplicate grid point {dup!r}")
    full = np.unique(np.concatenate([[lo], srt, [hi]]))
    if full.size < 3:
        raise PointOutsideInterval("grid needs at least one interior point")
    return Grid(full)


def build_grid(model: DiffusionModel, n_interior: int | None = None,
               placement: str | Sequence[float] = "uniform") -> Grid:
    """Grid on the model interval.

    ``placement`` is ``"uniform"``, ``"chebyshev"`` or an explicit list of
    points (boundary points may be included or omitted).
    """
    lo, hi = model.lower_bound, model.upper_bound
    if not isinstance(placement, str):
        return _checked_grid(model, placement)
    if n_interior is None or n_interior < 1:
        raise ValueError("n_interior must be >= 1")
    if placement == "uniform":
        pts = lo + (hi - lo) * np.arange(n_interior + 2) / (n_interior + 1)
        pts[-1] = hi
        return Grid(pts)
    if placement == "chebyshev":
        k = np.arange(1, n_interior + 1)
        nodes = np.sort(np.cos((2 * k - 1) * np.pi / (2 * n_interior)))
        return _checked_grid(model, 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes)
    raise ValueError(f"unknown placement {placement!r}")


def refine_grid(grid: Grid) -> Grid:
    """Insert the midpoint of every interval."""
    p = grid.points
    out = np.empty(2 * p.size - 1)
    out[0::2] = p
    out[1::2] = 0.5 * (p[:-1] + p[1:])
    return Grid(out)


def uniform_schedule(model: DiffusionModel, levels: int, n0: int = 1) -> list[Grid]:
    """Nested uniform grids with ``n0, 2 n0 + 1, 4 n0 + 3, ...`` interior points."""
    grids = [build_grid(model, n0, "uniform")]
    for _ in range(levels - 1):
        grids.append(refine_grid(grids[-1]))
    return grids


def check_nested(schedule: Sequence[Grid]) -> None:
    for k in range(1, len(schedule)):
        if not schedule[k - 1].issubset(schedule[k]):
            raise NonNestedSchedule(f"level {k} grid is not a superset of level {k - 1}")
