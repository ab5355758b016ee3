"""Markovian randomized stopping times and the rate embedding.

A Markovian randomized stopping time (MRST) is given by an open continuation
set ``D`` and a stopping measure ``lambda`` on ``D``.  Along a path it stops
at the first time the clock ``A_t = int l^y_t lambda(dy)`` reaches an
independent Exp(1) variate, or when the path leaves ``D``.

Rates map into the unit interval through ``rate -> rate / (1 + rate)`` with
``inf -> 1``; the unit form is what the solver iterates on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import MissingLocalTime, NegativeRate, OutOfRange, PathTooShort
from .model import Grid

_KEY_TOL = 1e-12


def iota_unit(rate):
    """Map a rate in ``[0, inf]`` to ``[0, 1]``."""
    r = np.asarray(rate, dtype=float)
    if np.any(np.isnan(r)) or np.any(r < 0):
        raise NegativeRate(f"rates must be in [0, inf], got {rate!r}")
    with np.errstate(invalid="ignore"):
        u = np.where(np.isinf(r), 1.0, r / (1.0 + np.where(np.isinf(r), 0.0, r)))
    return float(u) if u.ndim == 0 else u


def iota_rate(u):
    """Inverse of :func:`iota_unit`; ``1 -> inf``."""
    v = np.asarray(u, dtype=float)
    if np.any(np.isnan(v)) or np.any((v < 0) | (v > 1)):
        raise OutOfRange(f"unit rates must lie in [0, 1], got {u!r}")
    with np.errstate(divide="ignore"):
        r = np.where(v == 1.0, np.inf, v / (1.0 - np.where(v == 1.0, 0.0, v)))
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Unit-form stopping rates of both players on the interior grid points."""

    grid: Grid
    units1: np.ndarray
    units2: np.ndarray

    def __post_init__(self):
        m = self.grid.n_interior
        for name in ("units1", "units2"):
            u = np.array(getattr(self, name), dtype=float)
            if u.shape != (m,):
                raise OutOfRange(f"{name} must have one entry per interior point ({m})")
            iota_rate(u)  # range check
            u.setflags(write=False)
            object.__setattr__(self, name, u)

    @classmethod
    def from_rates(cls, grid: Grid, rates1, rates2) -> "StrategyProfile":
        return cls(grid, np.atleast_1d(iota_unit(rates1)), np.atleast_1d(iota_unit(rates2)))

    @classmethod
    def zeros(cls, grid: Grid) -> "StrategyProfile":
        m = grid.n_interior
        return cls(grid, np.zeros(m), np.zeros(m))

    @property
    def rates1(self) -> np.ndarray:
        return np.atleast_1d(iota_rate(self.units1))

    @property
    def rates2(self) -> np.ndarray:
        return np.atleast_1d(iota_rate(self.units2))

    def units(self, player: int) -> np.ndarray:
        return self.units1 if player == 1 else self.units2

    def with_units(self, player: int, units) -> "StrategyProfile":
        if player == 1:
            return StrategyProfile(self.grid, units, self.units2)
        return StrategyProfile(self.grid, self.units1, units)

    def mrst(self, player: int) -> "MRST":
        return grid_strategy_to_mrst(self.grid, iota_rate(self.units(player)))

    def __eq__(self, other):
        return (isinstance(other, StrategyProfile) and self.grid == other.grid
                and np.array_equal(self.units1, other.units1)
                and np.array_equal(self.units2, other.units2))


@dataclass(frozen=True, eq=False)
class MRST:
    """Continuation set, atoms and optional piecewise-constant density.

    ``intervals`` is a sorted tuple of disjoint open intervals ``(a, b)``.
    ``atoms`` maps interior locations to finite positive rates; an infinite
    rate is canonicalised into removing the point from ``D``.  The density is
    ``(breaks, values)`` with ``values[k]`` on ``[breaks[k], breaks[k+1])``.
    """

    lower: float
    upper: float
    intervals: tuple[tuple[float, float], ...]
    atoms: tuple[tuple[float, float], ...] = ()
    density: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        ivs = sorted((float(a), float(b)) for a, b in self.intervals)
        for a, b in ivs:
            if not (self.lower <= a < b <= self.upper):
                raise OutOfRange(f"interval ({a}, {b}) outside [{self.lower}, {self.upper}]")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise OutOfRange("continuation intervals overlap")
        atoms = {}
        for x, rate in self.atoms:
            x, rate = float(x), float(rate)
            if math.isnan(rate) or rate < 0:
                raise NegativeRate(f"atom rate {rate!r} at {x!r}")
            if rate == 0.0:
                continue
            atoms[x] = rate
        removed = [x for x, r in atoms.items() if math.isinf(r)]
        for x in removed:
            del atoms[x]
            ivs = _remove_point(ivs, x)
        object.__setattr__(self, "intervals", tuple(ivs))
        for x in atoms:
            if self._component(np.array([x]))[0] < 0:
                raise OutOfRange(f"atom at {x!r} lies outside the continuation set")
        object.__setattr__(self, "atoms", tuple(sorted(atoms.items())))
        if self.density is not None:
            breaks = tuple(float(b) for b in self.density[0])
            vals = tuple(float(v) for v in self.density[1])
            if len(breaks) != len(vals) + 1 or any(np.diff(breaks) <= 0):
                raise OutOfRange("density needs strictly increasing breaks, one more than values")
            for k, v in enumerate(vals):
                if not (v >= 0 and math.isfinite(v)):
                    raise NegativeRate(f"density value {v!r}")
                if v > 0 and not any(a <= breaks[k] and breaks[k + 1] <= b for a, b in ivs):
                    raise OutOfRange(f"density cell {k} is not inside the continuation set")
            object.__setattr__(self, "density", (breaks, vals))

    # geometry ---------------------------------------------------------------

    @property
    def atom_points(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], float)

    @property
    def atom_rates(self) -> np.ndarray:
        return np.array([r for _, r in self.atoms], float)

    @property
    def density_breaks(self) -> np.ndarray:
        return np.array(self.density[0]) if self.density else np.zeros(0)

    @property
    def density_values(self) -> np.ndarray:
        return np.array(self.density[1]) if self.density else np.zeros(0)

    def _component(self, x: np.ndarray) -> np.ndarray:
        if not self.intervals:
            return np.full(np.shape(x), -1)
        a = np.array([iv[0] for iv in self.intervals])
        b = np.array([iv[1] for iv in self.intervals])
        k = np.searchsorted(a, x, side="right") - 1
        kc = np.clip(k, 0, None)
        inside = (k >= 0) & (x > a[kc]) & (x < b[kc])
        return np.where(inside, k, -1)

    def component_index(self, x) -> np.ndarray:
        """Index of the continuation interval containing ``x`` or -1."""
        return self._component(np.asarray(x, float))

    def in_continuation(self, x) -> np.ndarray:
        return self.component_index(x) >= 0

    def crossed_point(self, k_from: int, k_to: int) -> float:
        """First frontier point met when moving between two components."""
        if k_to > k_from:
            return self.intervals[k_from][1]
        return self.intervals[k_from][0]

    def scaled(self, factor: float) -> "MRST":
        dens = None
        if self.density is not None:
            dens = (self.density[0], tuple(factor * v for v in self.density[1]))
        return MRST(self.lower, self.upper, self.intervals,
                    tuple((x, factor * r) for x, r in self.atoms), dens)


def _remove_point(ivs, x):
    out = []
    for a, b in ivs:
        if a < x < b:
            out.extend([(a, x), (x, b)])
        else:
            out.append((a, b))
    return out


def grid_strategy_to_mrst(grid: Grid, rates) -> MRST:
    """Encode per-interior-point rates (rate form, may be inf) as an MRST."""
    pts = grid.interior
    if isinstance(rates, Mapping):
        rates = [rates.get(float(x), 0.0) for x in pts]
    rates = np.atleast_1d(np.asarray(rates, float))
    lo, hi = float(grid.points[0]), float(grid.points[-1])
    return MRST(lo, hi, ((lo, hi),), tuple(zip(pts.tolist(), rates.tolist())))


# clocks --------------------------------------------------------------------


@dataclass(frozen=True)
class ClockState:
    """Value of the additive functional and the time it became infinite."""

    accumulated: float = 0.0
    exhausted_at: float | None = None

    def advance(self, delta: float, t: float) -> "ClockState":
        if delta < 0:
            raise NegativeRate("clock increments are nonnegative")
        if self.exhausted_at is not None:
            return self
        acc = self.accumulated + delta
        return ClockState(acc, t if math.isinf(acc) else None)


def _lookup(estimates: Mapping[float, float], x: float):
    if x in estimates:
        return estimates[x]
    for key, val in estimates.items():
        if abs(float(key) - x) <= _KEY_TOL:
            return val
    raise MissingLocalTime(f"no local-time estimate for atom at {x!r}")


def clock_increment(mrst: MRST, path_segment: Sequence[float],
                    local_time_estimates: Mapping[float, float],
                    density_occupation: Sequence[float] | None = None) -> float:
    """Increase of ``A`` over a path segment.

    Parameters
    ----------
    mrst : MRST
    path_segment : sequence of float
        Consecutive states of the segment.
    local_time_estimates : mapping
        Local-time increment at every atom location.
    density_occupation : sequence of float, optional
        Per density cell, the increment of ``int_cell l^y dy``.

    Returns
    -------
    float
        ``inf`` if the segment leaves the continuation set.
    """
    seg = np.asarray(path_segment, float)
    comp = mrst.component_index(seg)
    if np.any(comp < 0) or np.any(comp != comp[0]):
        return math.inf
    delta = 0.0
    for x, rate in mrst.atoms:
        delta += rate * float(_lookup(local_time_estimates, x))
    if mrst.density is not None:
        if density_occupation is None:
            raise MissingLocalTime("density part needs per-cell occupation increments")
        delta += float(np.dot(mrst.density_values, np.asarray(density_occupation, float)))
    return delta


def clock_path(mrst: MRST, local_times: Mapping[float, np.ndarray],
               density_occupation: np.ndarray | None, n: int) -> np.ndarray:
    """Cumulative clock (without the exit jump) at every path index."""
    acc = np.zeros(n)
    for x, rate in mrst.atoms:
        acc += rate * np.asarray(_lookup(local_times, x), float)
    if mrst.density is not None:
        if density_occupation is None:
            raise MissingLocalTime("density part needs per-cell occupation")
        acc += np.asarray(density_occupation, float) @ mrst.density_values
    return acc


def sample_stop(mrst: MRST, times: Sequence[float], states: Sequence[float], E: float,
                local_times: Mapping[float, np.ndarray] | None = None,
                density_occupation: np.ndarray | None = None) -> tuple[float, float]:
    """Stopping time and location of an MRST along one discretised path.

    ``local_times`` maps each atom to its cumulative local time at every path
    index; ``density_occupation`` is the cumulative per-cell occupation with
    shape ``(len(times), n_cells)``.
    """
    t = np.asarray(times, float)
    x = np.asarray(states, float)
    comp = mrst.component_index(x)
    if comp[0] < 0:
        return float(t[0]), float(x[0])
    left = np.flatnonzero(comp != comp[0])
    k_exit = int(left[0]) if left.size else None
    acc = clock_path(mrst, local_times or {}, density_occupation, t.size)
    hit = np.flatnonzero(acc >= E)
    k_clock = int(hit[0]) if hit.size else None
    if k_clock is not None and (k_exit is None or k_clock < k_exit):
        return float(t[k_clock]), float(x[k_clock])
    if k_exit is not None:
        if comp[k_exit] < 0:
            return float(t[k_exit]), float(x[k_exit])
        return float(t[k_exit]), mrst.crossed_point(int(comp[0]), int(comp[k_exit]))
    raise PathTooShort(f"clock reached {acc[-1]:.4g} < E={E:.4g} and the path was not absorbed")
