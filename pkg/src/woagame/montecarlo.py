"""Path simulation and statistical oracles.

Two samplers are provided.  The embedded chain moves between grid points
with the exact sojourn probabilities (no time discretisation) and carries
discount factors multiplicatively; it is exact for grid strategies.  The
Euler sampler simulates time, accumulates band-estimated local time at the
atoms, and runs the two Exp(1) clocks; it handles general strategies.

Randomness is split into fixed-size chunks of paths, each with its own
child of ``SeedSequence(rng_seed)``, so results do not depend on how chunks
are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import Game
from .errors import BandTooWide
from .model import DiffusionModel, Grid, PayoffSpec
from .stopping import MRST, StrategyProfile, iota_unit

CHUNK = 1 << 14

ABSORBED, PLAYER1, PLAYER2, TIE = 0, 1, 2, 3


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10_000
    dt: float = 1e-4
    band_epsilon: float = 1e-2
    rng_seed: int = 0
    mode: str = "embedded_chain"
    horizon: float = 50.0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.dt > 0 or not self.band_epsilon > 0:
            raise ValueError("dt and band_epsilon must be positive")
        if self.mode not in ("embedded_chain", "euler"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    n: int
    m2: float = 0.0  # sum of squared deviations, kept for merging

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "EstimateWithError":
        x = np.asarray(x, float)
        n = x.size
        if n == 0:
            return cls(float("nan"), float("inf"), 0)
        mean = float(x.mean())
        m2 = float(np.sum((x - mean) ** 2))
        se = math.sqrt(m2 / (n - 1) / n) if n > 1 else float("inf")
        return cls(mean, se, n, m2)

    def merge(self, other: "EstimateWithError") -> "EstimateWithError":
        """Pairwise (Chan et al.) combination of two partial estimates."""
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta**2 * self.n * other.n / n
        se = math.sqrt(m2 / (n - 1) / n) if n > 1 else float("inf")
        return EstimateWithError(mean, se, n, m2)


def _chunk_rngs(seed, n_paths: int):
    n_chunks = -(-n_paths // CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for k, child in enumerate(children):
        yield np.random.default_rng(child), min(CHUNK, n_paths - k * CHUNK)


# embedded chain ------------------------------------------------------------


@dataclass(frozen=True)
class ChainSample:
    """Per-path outcome of the embedded chain."""

    stop_index: np.ndarray
    cause: np.ndarray
    disc1: np.ndarray
    disc2: np.ndarray
    visited: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.stop_index.size


def _chain_tables(game: Game, profile: StrategyProfile):
    u1, u2 = profile.units1, profile.units2
    inf1, inf2 = u1 == 1.0, u2 == 1.0
    fixed = inf1 | inf2
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = np.where(fixed, 0.0, u1 / (1.0 - np.where(fixed, 0.0, u1)))
        l2 = np.where(fixed, 0.0, u2 / (1.0 - np.where(fixed, 0.0, u2)))
    kappa = l1 + l2
    prim = {}
    for key, K in (("p", game.kernel(0.0)), (1, game.kernel_for(1)), (2, game.kernel_for(2))):
        prim[key] = K.primitives(kappa)
    a0, b0, k0 = prim["p"]
    ratios = {}
    for i in (1, 2):
        a, b, k = prim[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[i] = tuple(np.where(p0 > 0, p / np.where(p0 > 0, p0, 1.0), 0.0)
                              for p, p0 in ((a, a0), (b, b0), (k, k0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        share1 = np.where(kappa > 0, l1 / np.where(kappa > 0, kappa, 1.0), 0.0)
    return dict(a0=a0, b0=b0, share1=share1, inf1=inf1, inf2=inf2, ratios=ratios)


def simulate_embedded_chain(game: Game, profile: StrategyProfile, start: int, n_paths: int,
                            rng_seed=0, watch: int | None = None) -> ChainSample:
    """Sample stop location, cause and discount factors along the grid chain.

    Parameters
    ----------
    game, profile
        Grid game and strategy profile.
    start : int
        Grid index of the start.
    n_paths : int
    rng_seed : int
    watch : int, optional
        Grid index; if given, also record whether each path passed through it
        without stopping there.
    """
    tab = _chain_tables(game, profile)
    n_grid = len(game.grid)
    out = {k: [] for k in ("stop", "cause", "d1", "d2", "vis")}
    for rng, n in _chunk_rngs(rng_seed, n_paths):
        pos = np.full(n, start, dtype=np.int64)
        stop = np.full(n, -1, dtype=np.int64)
        cause = np.full(n, -1, dtype=np.int64)
        d1, d2 = np.ones(n), np.ones(n)
        vis = np.zeros(n, bool)
        active = np.arange(n)
        while active.size:
            p = pos[active]
            j = p - 1
            interior = (p > 0) & (p < n_grid - 1)
            jj = np.where(interior, j, 0)
            i1 = interior & tab["inf1"][jj]
            i2 = interior & tab["inf2"][jj]
            done_abs = ~interior
            done_fix = i1 | i2
            done = done_abs | done_fix
            idx = active[done]
            stop[idx] = p[done]
            cause[active[done_abs]] = ABSORBED
            cause[active[i1 & ~i2]] = PLAYER1
            cause[active[i2 & ~i1]] = PLAYER2
            cause[active[i1 & i2]] = TIE
            active, p, jj = active[~done], p[~done], jj[~done]
            if not active.size:
                break
            if watch is not None:
                vis[active[p == watch]] = True
            u = rng.random(active.size)
            v = rng.random(active.size)
            a0, b0 = tab["a0"][jj], tab["b0"][jj]
            up = u < a0
            down = ~up & (u < a0 + b0)
            kill = ~up & ~down
            for i, d in ((1, d1), (2, d2)):
                ra, rb, rk = tab["ratios"][i]
                d[active] *= np.where(up, ra[jj], np.where(down, rb[jj], rk[jj]))
            pos[active] = p + up.astype(np.int64) - down.astype(np.int64)
            killed = active[kill]
            stop[killed] = p[kill]
            cause[killed] = np.where(v[kill] < tab["share1"][jj[kill]], PLAYER1, PLAYER2)
            active = active[~kill]
        out["stop"].append(stop)
        out["cause"].append(cause)
        out["d1"].append(d1)
        out["d2"].append(d2)
        out["vis"].append(vis)
    cat = {k: np.concatenate(v) for k, v in out.items()}
    return ChainSample(cat["stop"], cat["cause"], cat["d1"], cat["d2"],
                       cat["vis"] if watch is not None else None)


def chain_payoff_samples(game: Game, sample: ChainSample):
    """Discounted payoff samples of both players."""
    x = sample.stop_index
    c = sample.cause
    j1 = np.where(c == PLAYER2, game.f[1][x], game.g[1][x]) * sample.disc1
    j2 = np.where(c == PLAYER1, game.f[2][x], game.g[2][x]) * sample.disc2
    return j1, j2


def mc_payoff_profile(game: Game, profile: StrategyProfile, start: int,
                      config: SimConfig) -> tuple[EstimateWithError, EstimateWithError]:
    """Embedded-chain estimates of both payoffs for a grid profile."""
    est = [EstimateWithError(0.0, 0.0, 0), EstimateWithError(0.0, 0.0, 0)]
    sample = simulate_embedded_chain(game, profile, start, config.n_paths, config.rng_seed)
    # merge chunk by chunk so the reduction order is fixed
    j1, j2 = chain_payoff_samples(game, sample)
    for lo in range(0, sample.n, CHUNK):
        sl = slice(lo, lo + CHUNK)
        est[0] = est[0].merge(EstimateWithError.from_samples(j1[sl]))
        est[1] = est[1].merge(EstimateWithError.from_samples(j2[sl]))
    return est[0], est[1]


# Euler sampler -------------------------------------------------------------


@dataclass(frozen=True)
class EulerPath:
    times: np.ndarray
    states: np.ndarray  # shape (n_paths, n_steps + 1)


def _step(model: DiffusionModel, x: np.ndarray, dt: float, z: np.ndarray):
    new = x + model.mu(x) * dt + model.sigma(x) * math.sqrt(dt) * z
    return np.clip(new, model.lower_bound, model.upper_bound)


def simulate_euler(model: DiffusionModel, start: float, dt: float, horizon: float,
                   rng: np.random.Generator | int = 0, n_paths: int = 1) -> EulerPath:
    """Euler-Maruyama skeleton absorbed at both ends.

    A step that crosses an end is clipped onto it and the path is held there.
    """
    if dt > horizon:
        raise ValueError("dt must not exceed the horizon")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_paths, n_steps + 1))
    x = np.full(n_paths, float(start))
    states[:, 0] = x
    lo, hi = model.lower_bound, model.upper_bound
    alive = (x > lo) & (x < hi)
    for k in range(1, n_steps + 1):
        z = rng.standard_normal(n_paths)
        x = np.where(alive, np.clip(_step(model, x, dt, z), lo, hi), x)
        alive &= (x > lo) & (x < hi)
        states[:, k] = x
    return EulerPath(times, states)


def local_time_estimate(times: np.ndarray, states: np.ndarray, y: float, band_epsilon: float,
                        model: DiffusionModel) -> np.ndarray:
    """Band estimator of the local time at ``y`` along each path.

    Returns the cumulative estimate at every time index (same shape as
    ``states``); uses ``(1 / 2 eps) sum 1{|X - y| < eps} sigma^2(X) dt``.
    """
    if y - band_epsilon < model.lower_bound or y + band_epsilon > model.upper_bound:
        raise BandTooWide(f"band {band_epsilon} around {y} leaves the state interval")
    x = np.atleast_2d(states)
    dt = np.diff(times)
    inc = (np.abs(x[:, :-1] - y) < band_epsilon) * model.sigma(x[:, :-1]) ** 2 * dt
    out = np.zeros_like(x)
    out[:, 1:] = np.cumsum(inc, axis=1) / (2.0 * band_epsilon)
    return out if np.ndim(states) == 2 else out[0]


@dataclass(frozen=True)
class RaceSample:
    tau1: np.ndarray
    x1: np.ndarray
    tau2: np.ndarray
    x2: np.ndarray
    too_short: int


def _check_band(mrst: MRST, eps: float):
    pts = sorted(set(mrst.atom_points.tolist())
                 | {a for a, _ in mrst.intervals} | {b for _, b in mrst.intervals})
    gaps = np.diff(pts) if len(pts) > 1 else np.array([np.inf])
    if eps >= 0.5 * float(np.min(gaps)):
        raise BandTooWide(f"band {eps} is not below half the minimum point spacing")


def _density_at(mrst: MRST, x: np.ndarray) -> np.ndarray:
    if mrst.density is None:
        return np.zeros_like(x)
    br, vals = mrst.density_breaks, mrst.density_values
    k = np.searchsorted(br, x, side="right") - 1
    ok = (k >= 0) & (k < vals.size)
    return np.where(ok, vals[np.clip(k, 0, vals.size - 1)], 0.0)


def _snap_to_atoms(mrst: MRST, x: np.ndarray, eps: float) -> np.ndarray:
    """Atom location for stops inside an atom's band (local time charges only there)."""
    pts = mrst.atom_points
    if not pts.size or not x.size:
        return x
    d = np.abs(x[:, None] - pts[None, :])
    k = np.argmin(d, axis=1)
    return np.where(d[np.arange(x.size), k] < eps, pts[k], x)


def _first(mask: np.ndarray) -> np.ndarray:
    """Index of the first True per row, or the row length if none."""
    return np.where(mask.any(axis=1), np.argmax(mask, axis=1), mask.shape[1])


def _euler_block(model: DiffusionModel, x0: np.ndarray, dt: float, k: int,
                 rng: np.random.Generator) -> np.ndarray:
    """``k`` absorbed Euler steps for every start; shape ``(len(x0), k + 1)``."""
    lo, hi = model.lower_bound, model.upper_bound
    out = np.empty((x0.size, k + 1))
    out[:, 0] = x0
    z = rng.standard_normal((k, x0.size))
    x = x0.copy()
    alive = (x > lo) & (x < hi)
    for s in range(k):
        x = np.where(alive, _step(model, x, dt, z[s]), x)
        alive &= (x > lo) & (x < hi)
        out[:, s + 1] = x
    return out


def euler_race(model: DiffusionModel, mrst1: MRST, mrst2: MRST, start: float,
               config: SimConfig, block: int = 256, until: str = "both") -> RaceSample:
    """Simulate both MRSTs on common Euler paths.

    With ``until="both"`` paths run until both players have stopped; with
    ``"first"`` they end at the first stop (enough for payoffs).

    Over each step the clocks accrue band local time at the left state.  A
    clock that reaches its exponential variate stops its player at the end of
    the step (at the atom whose band was visited); otherwise leaving the
    start component stops the player at the crossed frontier point.
    """
    eps, dt = config.band_epsilon, config.dt
    for m in (mrst1, mrst2):
        _check_band(m, eps)
    n_steps = int(math.ceil(config.horizon / dt))
    mrsts = (mrst1, mrst2)
    frontier = [(np.array([iv[0] for iv in m.intervals] or [np.nan]),
                 np.array([iv[1] for iv in m.intervals] or [np.nan])) for m in mrsts]
    res = {k: [] for k in ("t1", "x1", "t2", "x2")}
    too_short = 0
    for rng, n in _chunk_rngs(config.rng_seed, config.n_paths):
        E = rng.exponential(size=(2, n))
        x = np.full(n, float(start))
        tau = np.full((2, n), np.inf)
        xs = np.full((2, n), np.nan)
        acc = np.zeros((2, n))
        comp0 = [m.component_index(x) for m in mrsts]
        for i in (0, 1):
            out = comp0[i] < 0
            tau[i, out] = 0.0
            xs[i, out] = x[out]
        pending = (lambda t: np.isinf(t).any(axis=0)) if until == "both" else \
            (lambda t: np.isinf(t).all(axis=0))
        active = np.flatnonzero(pending(tau))
        done = 0
        while active.size and done < n_steps:
            k = min(block, n_steps - done)
            P = _euler_block(model, x[active], dt, k, rng)
            left = P[:, :-1]
            sig2dt = model.sigma(left) ** 2 * dt
            for i, m in enumerate(mrsts):
                live = np.isinf(tau[i, active])
                if not live.any():
                    continue
                ids, L, S = active[live], left[live], sig2dt[live]
                inc = _density_at(m, L) * S
                for p, rate in m.atoms:
                    inc += rate * (np.abs(L - p) < eps) * S / (2.0 * eps)
                cum = acc[i, ids][:, None] + np.cumsum(inc, axis=1)
                c0 = comp0[i][ids]
                k_ring = _first(cum >= E[i, ids][:, None])
                k_exit = _first(m.component_index(P[live, 1:]) != c0[:, None])
                ring = (k_ring < k) & (k_ring <= k_exit)
                leave = ~ring & (k_exit < k)
                rows = np.arange(ids.size)
                if ring.any():
                    kr = k_ring[ring]
                    tau[i, ids[ring]] = (done + kr + 1) * dt
                    xs[i, ids[ring]] = _snap_to_atoms(m, L[rows[ring], kr], eps)
                if leave.any():
                    ke = k_exit[leave]
                    up = P[live][rows[leave], ke + 1] > P[live][rows[leave], ke]
                    lo_pts, hi_pts = frontier[i]
                    tau[i, ids[leave]] = (done + ke + 1) * dt
                    xs[i, ids[leave]] = np.where(up, hi_pts[c0[leave]], lo_pts[c0[leave]])
                acc[i, ids] = cum[:, -1]
            x[active] = P[:, -1]
            done += k
            active = active[pending(tau[:, active])]
        too_short += int(active.size)
        res["t1"].append(tau[0])
        res["x1"].append(xs[0])
        res["t2"].append(tau[1])
        res["x2"].append(xs[1])
    cat = {k: np.concatenate(v) for k, v in res.items()}
    return RaceSample(cat["t1"], cat["x1"], cat["t2"], cat["x2"], too_short)


def race_payoffs(race: RaceSample, payoffs: PayoffSpec):
    """Discounted payoff samples from a race; unfinished paths are dropped."""
    ok = np.isfinite(np.minimum(race.tau1, race.tau2))
    t1, t2 = race.tau1[ok], race.tau2[ok]
    x1, x2 = race.x1[ok], race.x2[ok]
    first1 = t1 <= t2
    first2 = t2 <= t1
    j1 = np.where(first1, np.exp(-payoffs.r1 * t1) * payoffs.g(1)(np.where(first1, x1, x2)),
                  np.exp(-payoffs.r1 * t2) * payoffs.f(1)(x2))
    j2 = np.where(first2, np.exp(-payoffs.r2 * t2) * payoffs.g(2)(np.where(first2, x2, x1)),
                  np.exp(-payoffs.r2 * t1) * payoffs.f(2)(x1))
    return j1, j2


# front door ------------------------------------------------------------------


def _grid_lowering(model: DiffusionModel, mrst1: MRST, mrst2: MRST, start: float):
    """Grid and profile representing two density-free MRSTs, or None.

    The grid holds the ends, the start, every atom and every endpoint of a
    continuation interval.  Points outside a player's continuation set get
    unit rate 1: a path leaving a component first reaches its endpoint,
    which is a grid point.
    """
    if mrst1.density is not None or mrst2.density is not None:
        return None
    lo, hi = model.lower_bound, model.upper_bound
    pts = {lo, hi, float(start)}
    for m in (mrst1, mrst2):
        pts.update(m.atom_points.tolist())
        for a, b in m.intervals:
            pts.update((a, b))
    grid = Grid(np.array(sorted(pts)))
    units = []
    for m in (mrst1, mrst2):
        rate = dict(m.atoms)
        outside = m.component_index(grid.interior) < 0
        u = [1.0 if out else float(iota_unit(rate.get(x, 0.0)))
             for x, out in zip(grid.interior, outside)]
        units.append(np.array(u))
    return grid, StrategyProfile(grid, units[0], units[1])


def mc_payoff(model: DiffusionModel, payoffs: PayoffSpec, mrst1: MRST, mrst2: MRST,
              start: float, config: SimConfig):
    """Monte Carlo estimates of ``(J^1, J^2)`` from ``start``.

    Grid-representable strategies use the embedded chain unless
    ``config.mode == "euler"``; otherwise paths are simulated with Euler steps.
    Returns the two estimates and the number of paths that hit the horizon.
    """
    lowered = _grid_lowering(model, mrst1, mrst2, start) if config.mode == "embedded_chain" else None
    if lowered is not None:
        grid, profile = lowered
        game = Game(model, payoffs, grid)
        e1, e2 = mc_payoff_profile(game, profile, grid.index_of(float(start)), config)
        return e1, e2, 0
    race = euler_race(model, mrst1, mrst2, start, config, until="first")
    j1, j2 = race_payoffs(race, payoffs)
    return EstimateWithError.from_samples(j1), EstimateWithError.from_samples(j2), race.too_short


def tie_probability(model: DiffusionModel, mrst1: MRST, mrst2: MRST, start: float,
                    config: SimConfig, payoffs: PayoffSpec | None = None) -> EstimateWithError:
    """Frequency of simultaneous voluntary stops.

    Euler mode counts paths where both players stop away from the boundary
    within one step of each other.  Embedded mode counts stops caused by both
    players at once, which only a double infinite rate can produce.
    """
    if config.mode == "embedded_chain":
        lowered = _grid_lowering(model, mrst1, mrst2, start)
        if lowered is None:
            raise ValueError("embedded mode needs grid-representable strategies")
        grid, profile = lowered
        game = Game(model, payoffs or _flat_payoffs(), grid, check=False, validate=payoffs is not None)
        sample = simulate_embedded_chain(game, profile, grid.index_of(float(start)),
                                         config.n_paths, config.rng_seed)
        return EstimateWithError.from_samples((sample.cause == TIE).astype(float))
    race = euler_race(model, mrst1, mrst2, start, config)
    lo, hi = model.lower_bound, model.upper_bound
    both = np.isfinite(race.tau1) & np.isfinite(race.tau2)
    interior = (race.x1 > lo) & (race.x1 < hi) & (race.x2 > lo) & (race.x2 < hi)
    tie = both & interior & (np.abs(race.tau1 - race.tau2) <= config.dt * (1 + 1e-9))
    return EstimateWithError.from_samples(tie.astype(float))


def _flat_payoffs() -> PayoffSpec:
    one = lambda x: np.ones(np.shape(x))
    return PayoffSpec(one, one, one, one, 0.0, 0.0)
