"""Grid equilibria, refinement and stopped-location laws.

At an interior point, given both players' values at the neighbours, the
local game is settled by comparing ``g_i`` with ``q0_i``, the value of
waiting through one sojourn without being stopped.  Player ``i`` "wants out"
if ``g_i > q0_i``.  If neither wants out both continue.  If exactly one
does, that one stops.  If both do, each player stops at the rate that makes
the other indifferent:

    lam_2 = (g_1 - q0_1) / (G_1 (f_1 - g_1)),   and symmetrically,

which is the war-of-attrition mixing at grid scale.  Points with ``g = f``
for both players stop at once.  Fixing these regimes makes both value
vectors solutions of tridiagonal systems, so a profile whose regimes
reproduce themselves is an exact equilibrium.  The solver looks for such a
profile with an active-set iteration, warm-started by damped
best-response-consistent updates, and certifies the outcome with the
complementarity residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import (
    Game,
    Residuals,
    ValueVectors,
    complementarity_residual,
    solve_tridiagonal,
)
from .errors import MassDeficit, NonProbabilityInput, NotConverged, WoaError
from .model import DiffusionModel, Grid, PayoffSpec, check_nested
from .stopping import StrategyProfile

log = logging.getLogger(__name__)

REGIME_TOL = 1e-13

# regime codes
CONT, STOP1, STOP2, BOTH, MIX = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iterations: int = 400
    damping: float = 0.5
    residual_tolerance: float = 1e-8
    newton_enabled: bool = True
    restart_seeds: int = 4
    rng_seed: int = 0
    warm_start_threshold: float = 1e-2

    def __post_init__(self):
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_outer_iterations < 1 or self.restart_seeds < 0:
            raise ValueError("iteration and restart counts must be nonnegative")


@dataclass
class EquilibriumResult:
    profile: StrategyProfile
    values: ValueVectors
    residual_max: float
    per_point_residuals: tuple[np.ndarray, np.ndarray]
    iterations_used: int
    method_trace: list[str]
    converged: bool
    residual_history: list[float] = field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return self.profile.grid


# local regimes ---------------------------------------------------------------


def local_regimes(game: Game, w1: np.ndarray, w2: np.ndarray, tol: float = REGIME_TOL):
    """Regime codes and target unit rates from current value vectors."""
    d, gap, G = {}, {}, {}
    for i, w in ((1, w1), (2, w2)):
        K = game.kernel_for(i)
        q0 = K.e_up * w[2:] + K.e_low * w[:-2]
        d[i] = game.g[i][1:-1] - q0
        gap[i] = game.f[i][1:-1] - game.g[i][1:-1]
        G[i] = K.G
    out1, out2 = d[1] > tol, d[2] > tol
    triv1, triv2 = gap[1] <= tol, gap[2] <= tol
    codes = np.full(game.m, CONT)
    codes[out1 & ~out2] = STOP1
    codes[~out1 & out2] = STOP2
    both = out1 & out2
    codes[both] = MIX
    codes[both & triv2] = STOP2
    codes[both & triv1] = STOP1
    codes[triv1 & triv2] = BOTH
    u1 = np.where((codes == STOP1) | (codes == BOTH), 1.0, 0.0)
    u2 = np.where((codes == STOP2) | (codes == BOTH), 1.0, 0.0)
    mix = codes == MIX
    with np.errstate(divide="ignore", invalid="ignore"):
        u2 = np.where(mix, d[1] / (d[1] + G[1] * gap[1]), u2)
        u1 = np.where(mix, d[2] / (d[2] + G[2] * gap[2]), u1)
    return codes, u1, u2


def regime_values(game: Game, codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value vectors implied by fixed regimes."""
    out = []
    for i in (1, 2):
        K = game.kernel_for(i)
        g, f = game.g[i], game.f[i]
        other = STOP2 if i == 1 else STOP1
        fixed = codes != CONT
        vals = g.copy()
        vals[1:-1] = np.where(codes == other, f[1:-1], g[1:-1])
        out.append(solve_tridiagonal(fixed, vals, K.e_up, K.e_low, np.zeros(game.m)))
    return out[0], out[1]


def _active_set(game: Game, codes: np.ndarray, max_steps: int):
    """Iterate regimes until they reproduce themselves."""
    seen = set()
    for step in range(1, max_steps + 1):
        w1, w2 = regime_values(game, codes)
        new, u1, u2 = local_regimes(game, w1, w2)
        if np.array_equal(new, codes):
            return StrategyProfile(game.grid, np.clip(u1, 0, 1), np.clip(u2, 0, 1)), step
        key = new.tobytes()
        if key in seen:
            return None, step
        seen.add(key)
        codes = new
    return None, max_steps


def _nonstop(game: Game, u1: np.ndarray, u2: np.ndarray):
    for i, (own, opp) in ((1, (u1, u2)), (2, (u2, u1))):
        gap = game.f[i][1:-1] - game.g[i][1:-1]
        own[(opp == 1.0) & (gap > 0)] = 0.0
    return u1, u2


def solve_grid_equilibrium(game: Game, options: SolverOptions | None = None,
                           initial: StrategyProfile | None = None) -> EquilibriumResult:
    """Certified equilibrium of the grid game.

    Raises
    ------
    NotConverged
        If no start reaches the residual tolerance; carries the best profile
        found and the phase trace.
    """
    opts = options or SolverOptions()
    rng = np.random.default_rng(opts.rng_seed)
    m = game.m
    trace: list[str] = []
    history: list[float] = []
    best: tuple[float, StrategyProfile | None] = (np.inf, None)
    iterations = 0
    budget = max(1, opts.max_outer_iterations // (opts.restart_seeds + 1))

    def finish(profile, res: Residuals):
        return EquilibriumResult(profile, res.values, res.sup, (res.res1, res.res2),
                                 iterations, trace, res.sup <= opts.residual_tolerance, history)

    for start in range(opts.restart_seeds + 1):
        if start == 0:
            profile = initial if initial is not None else StrategyProfile.zeros(game.grid)
            trace.append("start")
        else:
            profile = StrategyProfile(game.grid, rng.uniform(size=m), rng.uniform(size=m))
            trace.append(f"restart-{start}")
        for it in range(budget):
            iterations += 1
            res = complementarity_residual(game, profile)
            history.append(res.sup)
            if res.sup < best[0]:
                best = (res.sup, profile)
            if res.sup <= opts.residual_tolerance:
                return finish(profile, res)
            vals = res.values
            codes, t1, t2 = local_regimes(game, vals.w1, vals.w2)
            if opts.newton_enabled and (it == 0 or res.sup < opts.warm_start_threshold):
                cand, steps = _active_set(game, codes, 2 * m + 10)
                trace.append("active-set" if cand is not None else "active-set-failed")
                if cand is not None:
                    cres = complementarity_residual(game, cand)
                    history.append(cres.sup)
                    if cres.sup < best[0]:
                        best = (cres.sup, cand)
                    if cres.sup <= opts.residual_tolerance:
                        return finish(cand, cres)
            if not trace or trace[-1] != "damped-br":
                trace.append("damped-br")
            d = opts.damping
            u1 = (1 - d) * profile.units1 + d * t1
            u2 = (1 - d) * profile.units2 + d * t2
            # snap exact pure targets so regimes can settle
            u1 = np.where(np.abs(u1 - t1) < 1e-15, t1, u1)
            u2 = np.where(np.abs(u2 - t2) < 1e-15, t2, u2)
            u1, u2 = _nonstop(game, np.clip(u1, 0, 1), np.clip(u2, 0, 1))
            profile = StrategyProfile(game.grid, u1, u2)
    raise NotConverged(f"best residual {best[0]:.3g} above {opts.residual_tolerance:.3g}",
                       best_residual=best[0], trace=trace, best=best[1])


# stopped laws ------------------------------------------------------------------


CAUSES = ("absorbed", "player1", "player2", "tie")


@dataclass(frozen=True)
class StoppedLaw:
    """Law of the stopped location on the grid, split by stop cause."""

    points: np.ndarray
    probs: np.ndarray
    by_cause: dict
    mass_deficit: float = 0.0


def stopped_law_matrix(game: Game, profile: StrategyProfile, which="game"):
    """Stopped-location probabilities from every grid start.

    Returns a dict mapping cause to an ``(n, n)`` array whose row ``s`` is the
    probability of stopping at each grid point from start ``s`` for that cause.
    """
    K = game.kernel(0.0)
    n, m = len(game.grid), game.m
    u1 = profile.units1 if which in ("game", 1) else np.zeros(m)
    u2 = profile.units2 if which in ("game", 2) else np.zeros(m)
    inf1, inf2 = u1 == 1.0, u2 == 1.0
    fixed = inf1 | inf2
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = np.where(fixed, 0.0, u1 / (1.0 - np.where(fixed, 0.0, u1)))
        l2 = np.where(fixed, 0.0, u2 / (1.0 - np.where(fixed, 0.0, u2)))
    kappa = l1 + l2
    den = 1.0 + K.G * kappa
    a, b = K.e_up / den, K.e_low / den
    kill1, kill2 = K.G * l1 / den, K.G * l2 / den
    masks = {
        "player1": inf1 & ~inf2,
        "player2": inf2 & ~inf1,
        "tie": inf1 & inf2,
    }
    out = {}
    for cause in CAUSES:
        cols = np.zeros((n, n))
        for k in range(n):
            vals = np.zeros(n)
            rhs = np.zeros(m)
            if cause == "absorbed":
                vals[k] = 1.0 if k in (0, n - 1) else 0.0
            elif 0 < k < n - 1:
                j = k - 1
                if masks[cause][j]:
                    vals[k] = 1.0
                if cause == "player1":
                    rhs[j] = kill1[j]
                elif cause == "player2":
                    rhs[j] = kill2[j]
            if not vals.any() and not rhs.any():
                continue
            cols[:, k] = solve_tridiagonal(fixed, vals, a, b, rhs)
        out[cause] = cols
    return out


def stopped_distribution(game: Game, profile: StrategyProfile, start, which="game") -> StoppedLaw:
    """Exact law of the stopped location from a grid start.

    ``which`` is ``"game"`` for the first of the two stopping times, or 1 / 2
    for one player's stopping time alone.
    """
    s = start if isinstance(start, (int, np.integer)) else game.grid.index_of(float(start))
    mats = stopped_law_matrix(game, profile, which)
    by_cause = {c: np.clip(mats[c][s], 0.0, None) for c in CAUSES}
    total = sum(by_cause.values())
    mass = float(total.sum())
    deficit = 1.0 - mass
    if abs(deficit) > 1e-10:
        log.warning("stopped law from index %d has mass %.12g; renormalised", s, mass)
        total = total / mass
        by_cause = {c: v / mass for c, v in by_cause.items()}
        if abs(deficit) > 1e-6:
            raise MassDeficit(f"stopped law mass {mass!r} from start index {s}")
    return StoppedLaw(game.grid.points.copy(), total, by_cause, deficit)


def _as_law(law):
    if isinstance(law, StoppedLaw):
        return law.points, law.probs
    pts, probs = law
    return np.asarray(pts, float), np.asarray(probs, float)


def distribution_distance(law_a, law_b, tol: float = 1e-9) -> float:
    """1-Wasserstein distance between two discrete laws on the line."""
    xa, pa = _as_law(law_a)
    xb, pb = _as_law(law_b)
    for p in (pa, pb):
        if np.any(p < -tol) or abs(p.sum() - 1.0) > tol or not np.all(np.isfinite(p)):
            raise NonProbabilityInput("laws need nonnegative weights summing to 1")
    xs = np.union1d(xa, xb)
    ca = np.array([pa[xa <= x].sum() for x in xs])
    cb = np.array([pb[xb <= x].sum() for x in xs])
    return float(np.sum(np.abs(ca - cb)[:-1] * np.diff(xs)))


# refinement ----------------------------------------------------------------


@dataclass
class RefinementLevel:
    grid: Grid
    result: EquilibriumResult | None
    value_distance: float | None = None
    law_distance: float | None = None
    error: str | None = None

    @property
    def size(self) -> int:
        return len(self.grid)


@dataclass
class RefinementReport:
    levels: list[RefinementLevel]

    @property
    def value_distances(self) -> list[float]:
        return [lv.value_distance for lv in self.levels[1:]]

    @property
    def law_distances(self) -> list[float]:
        return [lv.law_distance for lv in self.levels[1:]]


def inject(coarse: StrategyProfile, fine: Grid) -> StrategyProfile:
    """Carry coarse rates to the coincident points of a finer grid; 0 elsewhere."""
    m = fine.n_interior
    u1, u2 = np.zeros(m), np.zeros(m)
    idx = np.searchsorted(fine.interior, coarse.grid.interior)
    u1[idx] = coarse.units1
    u2[idx] = coarse.units2
    return StrategyProfile(fine, u1, u2)


def refine_and_solve(model: DiffusionModel, payoffs: PayoffSpec, schedule: Sequence[Grid],
                     options: SolverOptions | None = None, check: bool = True) -> RefinementReport:
    """Solve every level of a nested schedule, warm-starting from the previous one.

    Distances to the previous level are taken on the coarse grid's points:
    the sup distance of the value vectors and the largest Wasserstein
    distance between the game's stopped-location laws over coarse starts.
    """
    check_nested(schedule)
    levels: list[RefinementLevel] = []
    prev: tuple[Game, EquilibriumResult] | None = None
    for k, grid in enumerate(schedule):
        game = Game(model, payoffs, grid, check=check, validate=(k == 0))
        init = inject(prev[1].profile, grid) if prev else None
        try:
            res = solve_grid_equilibrium(game, options, init)
        except NotConverged as exc:
            log.warning("level %d did not converge: %s", k, exc)
            levels.append(RefinementLevel(grid, None, error=str(exc)))
            prev = None
            continue
        level = RefinementLevel(grid, res)
        if prev is not None:
            pgame, pres = prev
            idx = np.searchsorted(grid.points, pgame.grid.points)
            level.value_distance = float(max(
                np.max(np.abs(res.values.w1[idx] - pres.values.w1)),
                np.max(np.abs(res.values.w2[idx] - pres.values.w2))))
            fine_laws = stopped_law_matrix(game, res.profile)
            coarse_laws = stopped_law_matrix(pgame, pres.profile)
            dist = 0.0
            for s_c, s_f in enumerate(idx):
                pf = sum(fine_laws[c][s_f] for c in CAUSES)
                pc = sum(coarse_laws[c][s_c] for c in CAUSES)
                dist = max(dist, distribution_distance((grid.points, pf / pf.sum()),
                                                       (pgame.grid.points, pc / pc.sum())))
            level.law_distance = dist
        levels.append(level)
        prev = (game, res)
    return RefinementReport(levels)


__all__ = [
    "SolverOptions", "EquilibriumResult", "solve_grid_equilibrium", "refine_and_solve",
    "stopped_distribution", "distribution_distance", "RefinementReport", "StoppedLaw",
    "local_regimes", "inject", "WoaError",
]
