"""Brute-force solvers for tiny instances, independent of the main solver.

* :func:`one_point_equilibrium` handles a single interior point.  It uses
  the shooting-method primitives (not the Riccati kernel) and bisects the
  two indifference equations.
* :func:`enumerate_best_responses` scores every pure stop set with the
  exact payoff solve and returns the optimal ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .analytics import sojourn_primitives_ode
from .engine import Game, player_values, pure_stop_units
from .model import DiffusionModel, PayoffSpec
from .stopping import iota_rate

GAP_TOL = 1e-13


@dataclass(frozen=True)
class OnePointSolution:
    point: float
    units1: float
    units2: float
    regime: str
    bisection_steps: int


def _continuation(model, payoffs, player, l, c, u, opp_unit):
    """Value of never stopping at ``c`` against an opponent unit rate."""
    g, f = payoffs.g(player), payoffs.f(player)
    if opp_unit >= 1.0:
        return float(f(c))
    kappa = float(iota_rate(opp_unit))
    a, b, k = sojourn_primitives_ode(model, payoffs.r(player), l, c, u, kappa)
    return a * float(g(u)) + b * float(g(l)) + k * float(f(c))


def _bisect(fn, target, xtol=1e-15):
    """Root of the increasing map ``fn(v) = target`` on ``(0, 1)``."""
    lo, hi, steps = 0.0, 1.0, 0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        steps += 1
    return 0.5 * (lo + hi), steps


def one_point_equilibrium(model: DiffusionModel, payoffs: PayoffSpec,
                          point: float | None = None) -> OnePointSolution:
    """Equilibrium on the grid ``{l, c, u}`` under the solver's selection rule.

    A player who gains from stopping against a non-stopper is said to want
    to stop.  If neither wants to, nobody stops; if one does, that player
    stops at once.  If both do, each mixes so that the other is indifferent.
    A player with ``g = f`` at ``c`` has nothing to wait for and stops.
    """
    l, u = model.lower_bound, model.upper_bound
    c = model.midpoint if point is None else float(point)
    want, gap = {}, {}
    for i in (1, 2):
        gi = float(payoffs.g(i)(c))
        want[i] = gi - _continuation(model, payoffs, i, l, c, u, 0.0) > GAP_TOL
        gap[i] = float(payoffs.f(i)(c)) - gi
    if not (want[1] or want[2]):
        return OnePointSolution(c, 0.0, 0.0, "continue", 0)
    if want[1] and not want[2]:
        return OnePointSolution(c, 1.0, 0.0, "stop1", 0)
    if want[2] and not want[1]:
        return OnePointSolution(c, 0.0, 1.0, "stop2", 0)
    trivial1, trivial2 = gap[1] <= GAP_TOL, gap[2] <= GAP_TOL
    if trivial1 and trivial2:
        return OnePointSolution(c, 1.0, 1.0, "both", 0)
    if trivial1 or trivial2:
        return OnePointSolution(c, float(trivial1), float(trivial2),
                                "stop1" if trivial1 else "stop2", 0)
    # player 2's unit rate makes player 1 indifferent, and vice versa
    u2, n2 = _bisect(lambda v: _continuation(model, payoffs, 1, l, c, u, v), float(payoffs.g(1)(c)))
    u1, n1 = _bisect(lambda v: _continuation(model, payoffs, 2, l, c, u, v), float(payoffs.g(2)(c)))
    return OnePointSolution(c, u1, u2, "mixed", n1 + n2)


@dataclass(frozen=True)
class Enumeration:
    value: np.ndarray
    optimal_sets: frozenset[frozenset[int]]
    n_candidates: int


def enumerate_best_responses(game: Game, opponent_units: np.ndarray, player: int,
                             tol: float = 1e-10, max_points: int = 12) -> Enumeration:
    """Pointwise-optimal value and all optimal pure stop sets.

    Stop sets are sets of interior indices; points where the opponent stops
    at once are excluded, as the tie-breaking rule requires.
    """
    m = game.m
    if m > max_points:
        raise ValueError(f"enumeration over 2^{m} stop sets is too large")
    opp = np.asarray(opponent_units, float)
    free = [j for j in range(m) if opp[j] != 1.0]
    scored = []
    for k in range(len(free) + 1):
        for subset in itertools.combinations(free, k):
            mask = np.zeros(m, bool)
            mask[list(subset)] = True
            scored.append((frozenset(subset), player_values(game, player, pure_stop_units(mask), opp)))
    value = np.max(np.stack([w for _, w in scored]), axis=0)
    optimal = frozenset(s for s, w in scored if np.all(w >= value - tol))
    return Enumeration(value, optimal, len(scored))
