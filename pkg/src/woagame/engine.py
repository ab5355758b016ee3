"""Exact evaluation of the grid game.

On a grid the diffusion moves between neighbouring points, so the payoff of a
grid strategy profile solves a tridiagonal system: at an interior point with
finite rates

    w(j) = a_j w(j+1) + b_j w(j-1) + c_j (lam_own g + lam_opp f) / kappa_j,

with ``kappa_j = lam_own + lam_opp`` and ``(a, b, c)`` the sojourn primitives.
Infinite rates pin values: own stop pays ``g``, opponent stop pays ``f``,
simultaneous stop pays ``g``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .analytics import GridKernel
from .errors import NoConvergence, SingularSystem
from .model import DiffusionModel, Grid, PayoffSpec, validate_assumptions
from .stopping import StrategyProfile

TIE_TOL = 1e-12


class Game:
    """Model, payoffs and grid together with cached sojourn kernels.

    Parameters
    ----------
    model, payoffs, grid
        Problem data.
    check : bool
        Run the dual-method gate when building kernels.
    validate : bool
        Refuse data that fail the standing assumptions.
    """

    def __init__(self, model: DiffusionModel, payoffs: PayoffSpec, grid: Grid,
                 check: bool = True, validate: bool = True):
        if validate:
            validate_assumptions(model, payoffs, max(1001, 10 * len(grid)), grid).raise_if_failed()
        self.model, self.payoffs, self.grid = model, payoffs, grid
        self.check = check
        pts = grid.points
        self.g = {i: payoffs.g(i)(pts) for i in (1, 2)}
        self.f = {i: payoffs.f(i)(pts) for i in (1, 2)}
        # exact boundary condition (C): use g on both ends
        for i in (1, 2):
            self.f[i][[0, -1]] = self.g[i][[0, -1]]
        self._kernels: dict[float, GridKernel] = {}

    def kernel(self, r: float) -> GridKernel:
        r = float(r)
        if r not in self._kernels:
            self._kernels[r] = GridKernel(self.model, self.grid, r, check=self.check)
        return self._kernels[r]

    def kernel_for(self, player: int) -> GridKernel:
        return self.kernel(self.payoffs.r(player))

    def with_grid(self, grid: Grid) -> "Game":
        return Game(self.model, self.payoffs, grid, self.check, validate=False)

    @property
    def m(self) -> int:
        return self.grid.n_interior


@dataclass(frozen=True)
class ValueVectors:
    """Payoffs of both players from every grid point."""

    w1: np.ndarray
    w2: np.ndarray

    def w(self, player: int) -> np.ndarray:
        return self.w1 if player == 1 else self.w2


def solve_tridiagonal(fixed: np.ndarray, fixed_values: np.ndarray, a: np.ndarray,
                      b: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``w(j) - a_j w(j+1) - b_j w(j-1) = rhs_j`` on the interior.

    ``fixed`` (interior mask) marks Dirichlet rows with ``w(j) = fixed_values``;
    the two boundary values are ``fixed_values`` at the ends of a length
    ``m + 2`` vector (interior arrays have length ``m``).
    """
    m = a.size
    n = m + 2
    ab = np.zeros((3, n))
    ab[1] = 1.0
    y = np.empty(n)
    y[0], y[-1] = fixed_values[0], fixed_values[-1]
    free = ~fixed
    sup = np.where(free, -a, 0.0)
    sub = np.where(free, -b, 0.0)
    ab[0, 2:] = sup
    ab[2, :-2] = sub
    y[1:-1] = np.where(free, rhs, fixed_values[1:-1])
    try:
        w = solve_banded((1, 1), ab, y)
    except (LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise SingularSystem("non-finite solution")
    res = w[1:-1] - np.where(free, a * w[2:] + b * w[:-2], 0.0) - y[1:-1]
    scale = max(1.0, float(np.max(np.abs(y))))
    if np.max(np.abs(res), initial=0.0) > 1e-10 * scale:
        raise SingularSystem(f"residual {np.max(np.abs(res)):.3g} after tridiagonal solve")
    return w


def player_values(game: Game, player: int, u_own: np.ndarray, u_opp: np.ndarray) -> np.ndarray:
    """Payoff vector of ``player`` for unit-form rates ``(u_own, u_opp)``."""
    K = game.kernel_for(player)
    g, f = game.g[player], game.f[player]
    u_own = np.asarray(u_own, float)
    u_opp = np.asarray(u_opp, float)
    own_inf, opp_inf = u_own == 1.0, u_opp == 1.0
    fixed = own_inf | opp_inf
    vals = g.copy()
    vals[1:-1] = np.where(own_inf, g[1:-1], np.where(opp_inf, f[1:-1], 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(fixed, 0.0, u_own / (1.0 - np.where(fixed, 0.0, u_own)))
        lp = np.where(fixed, 0.0, u_opp / (1.0 - np.where(fixed, 0.0, u_opp)))
    den = 1.0 + K.G * (lo + lp)
    a, b = K.e_up / den, K.e_low / den
    rhs = K.G * (lo * g[1:-1] + lp * f[1:-1]) / den
    return solve_tridiagonal(fixed, vals, a, b, rhs)


def payoff_values(game: Game, profile: StrategyProfile) -> ValueVectors:
    """Exact payoffs ``J^1, J^2`` of a grid profile from every grid point."""
    return ValueVectors(player_values(game, 1, profile.units1, profile.units2),
                        player_values(game, 2, profile.units2, profile.units1))


def continuation_F(game: Game, opponent_units: np.ndarray, player: int) -> np.ndarray:
    """Payoff of never stopping voluntarily against the opponent's rates."""
    return player_values(game, player, np.zeros(game.m), opponent_units)


def continuation_value(K: GridKernel, w: np.ndarray, u_opp: np.ndarray,
                       f: np.ndarray) -> np.ndarray:
    """Value of not stopping at each interior point for one instant.

    ``w`` is the player's value vector (used at the neighbours), the
    opponent kills at rate ``u_opp`` (unit form) paying ``f``.
    """
    u = np.asarray(u_opp, float)
    move = K.e_up * w[2:] + K.e_low * w[:-2]
    return ((1.0 - u) * move + K.G * u * f[1:-1]) / ((1.0 - u) + K.G * u)


@dataclass(frozen=True)
class BestResponseSolution:
    """Optimal-stopping solution against a fixed opponent.

    ``stop_set`` is the stopping region of the largest optimal stopping time
    (points where stopping is strictly better).  ``marker`` encodes each
    interior point: 0 continue, 1 stop, 2 indifferent (continue under the
    largest optimal time, stopping equally good).
    """

    value: np.ndarray
    stop_set: np.ndarray
    marker: np.ndarray
    iterations: int
    method: str

    @property
    def largest_optimal_marker(self) -> np.ndarray:
        return self.marker

    @property
    def indifferent(self) -> np.ndarray:
        return self.marker == 2


def best_response(game: Game, opponent_units: np.ndarray, player: int,
                  max_iterations: int | None = None, tie_tol: float = TIE_TOL) -> BestResponseSolution:
    """Best response of ``player`` by policy iteration.

    Policies are pure stop sets.  A policy switches at a point only when the
    other action is strictly better by more than ``tie_tol``.  If policy
    iteration has not settled after ``max_iterations`` sweeps, value
    iteration takes over with the contraction bound as stopping rule.
    """
    K = game.kernel_for(player)
    g, f = game.g[player], game.f[player]
    u_opp = np.asarray(opponent_units, float)
    opp_inf = u_opp == 1.0
    m = game.m
    max_iterations = max_iterations or (2 * m + 10)
    stop = np.zeros(m, bool)
    value = None
    for it in range(1, max_iterations + 1):
        value = player_values(game, player, stop.astype(float), u_opp)
        q = continuation_value(K, value, u_opp, f)
        gain = g[1:-1] - q
        new = np.where(stop, gain >= -tie_tol, gain > tie_tol) & ~opp_inf
        if np.array_equal(new, stop):
            return _finish(value, q, g, opp_inf, tie_tol, it, "policy")
        stop = new
    return _value_iteration(game, player, u_opp, value, tie_tol)


def _finish(value, q, g, opp_inf, tie_tol, iterations, method):
    gain = g[1:-1] - q
    stop = (gain > tie_tol) & ~opp_inf
    marker = np.where(stop, 1, np.where(np.abs(gain) <= tie_tol, 2, 0))
    marker = np.where(opp_inf, 0, marker)
    return BestResponseSolution(value, stop, marker, iterations, method)


def _value_iteration(game, player, u_opp, start, tie_tol, tol=1e-13, max_iterations=200000):
    K = game.kernel_for(player)
    g, f = game.g[player], game.f[player]
    opp_inf = u_opp == 1.0
    rho = float(np.max(np.where(opp_inf, 0.0, K.e_up + K.e_low)))
    v = start.copy()
    for it in range(1, max_iterations + 1):
        q = continuation_value(K, v, u_opp, f)
        new = v.copy()
        new[1:-1] = np.where(opp_inf, f[1:-1], np.maximum(g[1:-1], q))
        delta = float(np.max(np.abs(new - v)))
        v = new
        if rho < 1.0 and delta * rho / (1.0 - rho) <= tol:
            q = continuation_value(K, v, u_opp, f)
            return _finish(v, q, g, opp_inf, tie_tol, it, "value")
    raise NoConvergence("value iteration did not contract", max_iterations, delta)


@dataclass(frozen=True)
class Residuals:
    """Per-point complementarity residuals and the quantities behind them."""

    res1: np.ndarray
    res2: np.ndarray
    stop1: np.ndarray
    stop2: np.ndarray
    cont1: np.ndarray
    cont2: np.ndarray
    values: ValueVectors

    @property
    def sup(self) -> float:
        return float(max(np.max(self.res1, initial=0.0), np.max(self.res2, initial=0.0)))

    def res(self, player: int) -> np.ndarray:
        return self.res1 if player == 1 else self.res2

    def cont(self, player: int) -> np.ndarray:
        return self.cont1 if player == 1 else self.cont2

    @property
    def witness(self) -> tuple[int, int]:
        """(player, interior index) of the largest residual."""
        k1, k2 = int(np.argmax(self.res1)), int(np.argmax(self.res2))
        return (1, k1) if self.res1[k1] >= self.res2[k2] else (2, k2)


def complementarity_residual(game: Game, profile: StrategyProfile) -> Residuals:
    """Complementarity residuals of both players at every interior point."""
    vals = payoff_values(game, profile)
    out = {}
    for i in (1, 2):
        u_own, u_opp = profile.units(i), profile.units(3 - i)
        K = game.kernel_for(i)
        g, f = game.g[i][1:-1], game.f[i][1:-1]
        q = continuation_value(K, vals.w(i), u_opp, game.f[i])
        res = np.where(u_own == 0.0, np.maximum(g - q, 0.0),
                       np.where(u_own == 1.0, np.maximum(q - g, 0.0), np.abs(g - q)))
        nonstop = (u_opp == 1.0) & (f > g) & (u_own > 0.0)
        res = res + np.where(nonstop, f - g, 0.0)
        out[i] = (res, g, q)
    return Residuals(out[1][0], out[2][0], out[1][1], out[2][1], out[1][2], out[2][2], vals)


def nonstop_violations(game: Game, profile: StrategyProfile) -> list[tuple[int, int]]:
    """(player, interior index) pairs breaking the no-simultaneous-stop rule."""
    bad = []
    for i in (1, 2):
        g, f = game.g[i][1:-1], game.f[i][1:-1]
        hit = (profile.units(3 - i) == 1.0) & (f > g) & (profile.units(i) > 0.0)
        bad.extend((i, int(j)) for j in np.flatnonzero(hit))
    return bad


def pure_stop_units(stop_set: np.ndarray) -> np.ndarray:
    return np.asarray(stop_set, bool).astype(float)


def first_exit_units(m: int, i: int, k: int) -> np.ndarray:
    """Unit rates of the first exit from the open grid interval ``(x_i, x_k)``.

    Indices are full-grid indices with ``0 <= i < k <= m + 1``; interior
    points outside the interval stop immediately.
    """
    idx = np.arange(1, m + 1)
    return ((idx <= i) | (idx >= k)).astype(float)


def deviation_gain(game: Game, profile: StrategyProfile, player: int,
                   challenger_units: np.ndarray, base: np.ndarray | None = None) -> float:
    """Largest payoff improvement over all starts from switching own rates."""
    if base is None:
        base = payoff_values(game, profile).w(player)
    w = player_values(game, player, challenger_units, profile.units(3 - player))
    return float(np.max(w - base))

