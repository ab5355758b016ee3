"""Certification suites producing machine-readable reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytics import GridKernel
from .engine import (Game, best_response, complementarity_residual, deviation_gain,
                     first_exit_units, nonstop_violations, payoff_values)
from .errors import MethodDisagreement
from .montecarlo import (TIE, EstimateWithError, SimConfig, chain_payoff_samples,
                         simulate_embedded_chain)
from .solver import RefinementReport, stopped_distribution
from .stopping import StrategyProfile

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    measured: float | None = None
    threshold: float | None = None
    witness: object = None

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "measured": self.measured,
                "threshold": self.threshold, "witness": self.witness}


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def add(self, name, ok, measured=None, threshold=None, witness=None) -> None:
        self.checks.append(Check(name, PASS if ok else FAIL, _num(measured), _num(threshold), witness))

    def skip(self, name, reason: str) -> None:
        self.checks.append(Check(name, SKIPPED, witness=reason))

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.checks.extend(other.checks)
        return self

    def get(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {"overall": PASS if self.overall else FAIL,
                "checks": [c.to_dict() for c in self.checks]}


def _num(v):
    return None if v is None else float(v)


# equilibrium certificate ---------------------------------------------------


def deviation_sweep(game: Game, profile: StrategyProfile, player: int) -> tuple[float, str]:
    """Largest gain over single-point overrides and first-exit challengers."""
    base = payoff_values(game, profile).w(player)
    own = profile.units(player)
    m = game.m
    best, who = -np.inf, ""
    for j in range(m):
        for v in (0.0, 1.0):
            if own[j] == v:
                continue
            ch = own.copy()
            ch[j] = v
            gain = deviation_gain(game, profile, player, ch, base)
            if gain > best:
                best, who = gain, f"override x[{j + 1}]={v:g}"
    for i in range(m + 1):
        for k in range(i + 1, m + 2):
            gain = deviation_gain(game, profile, player, first_exit_units(m, i, k), base)
            if gain > best:
                best, who = gain, f"exit ({i}, {k})"
    return float(best), who


def certify_equilibrium(game: Game, profile: StrategyProfile, tolerance: float = 1e-8,
                        deviation_tolerance: float | None = None) -> VerificationReport:
    """Residual, Bellman optimality, deviation sweep and tie-breaking checks."""
    dev_tol = tolerance if deviation_tolerance is None else deviation_tolerance
    rep = VerificationReport()
    pts = game.grid.points
    res = complementarity_residual(game, profile)
    p, j = res.witness
    rep.add("residual", res.sup <= tolerance, res.sup, tolerance,
            {"player": p, "x": float(game.grid.interior[j])})
    values = res.values
    for i in (1, 2):
        br = best_response(game, profile.units(3 - i), i)
        gap = np.abs(br.value - values.w(i))
        k = int(np.argmax(gap))
        rep.add(f"value_optimality{i}", gap[k] <= tolerance, gap[k], tolerance, {"x": float(pts[k])})
    for i in (1, 2):
        gain, who = deviation_sweep(game, profile, i)
        rep.add(f"deviation_sweep{i}", gain <= dev_tol, max(gain, 0.0), dev_tol, who)
    bad = nonstop_violations(game, profile)
    rep.add("nonstop", not bad, len(bad), 0,
            [{"player": q, "x": float(game.grid.interior[k])} for q, k in bad] or None)
    return rep


# analytic against sampled ----------------------------------------------------


def default_starts(game: Game) -> list[int]:
    m = game.m
    return sorted({max(1, (m + 1) // 4), (m + 1) // 2 or 1, min(m, 3 * (m + 1) // 4)})


def cross_validate(game: Game, profile: StrategyProfile, sim_config: SimConfig,
                   starts=None, max_std_error: float = 1e-2) -> VerificationReport:
    """Compare exact payoffs and stopped laws with embedded-chain samples.

    Stopped-law checks report the worst per-point deviation in units of four
    binomial standard errors (pass iff at most 1).

    An estimate whose standard error exceeds ``max_std_error`` makes its
    check ``skipped`` as underpowered.  Each start uses the seed
    ``(sim_config.rng_seed, start)``.
    """
    rep = VerificationReport()
    try:
        for r in sorted({0.0, game.payoffs.r1, game.payoffs.r2}):
            GridKernel(game.model, game.grid, r, check=True)
    except MethodDisagreement as exc:
        rep.add("analytic_engine", False, witness=str(exc))
        return rep
    rep.add("analytic_engine", True)
    values = payoff_values(game, profile)
    n = sim_config.n_paths
    for s in (starts if starts is not None else default_starts(game)):
        s = int(s)
        x = float(game.grid.points[s])
        sample = simulate_embedded_chain(game, profile, s, n, (sim_config.rng_seed, s))
        for i, js in zip((1, 2), chain_payoff_samples(game, sample)):
            est = EstimateWithError.from_samples(js)
            name = f"payoff{i}@{x:.6g}"
            if est.std_error > max_std_error:
                rep.skip(name, f"underpowered: std_error {est.std_error:.3g}")
                continue
            diff = abs(est.mean - values.w(i)[s])
            rep.add(name, diff <= 3 * est.std_error + ZERO_TOL, diff, 3 * est.std_error)
        law = stopped_distribution(game, profile, s)
        freq = np.bincount(sample.stop_index, minlength=len(game.grid)) / n
        band = 4 * np.sqrt(law.probs * (1 - law.probs) / n) + ZERO_TOL
        name = f"stopped_law@{x:.6g}"
        if np.max(band) > max_std_error * 4:
            rep.skip(name, "underpowered")
        else:
            ratio = np.abs(freq - law.probs) / band
            k = int(np.argmax(ratio))
            rep.add(name, ratio[k] <= 1.0, ratio[k], 1.0, {"x": float(game.grid.points[k])})
        tie_freq = float(np.mean(sample.cause == TIE))
        tie_exact = float(law.by_cause["tie"].sum())
        if tie_exact == 0.0:
            rep.add(f"ties@{x:.6g}", tie_freq == 0.0, tie_freq, 0.0)
        else:
            se = np.sqrt(tie_exact * (1 - tie_exact) / n)
            rep.add(f"ties@{x:.6g}", abs(tie_freq - tie_exact) <= 4 * se + ZERO_TOL,
                    tie_freq, tie_exact)
    return rep


# refinement ----------------------------------------------------------------


def refinement_diagnostics(report: RefinementReport, tolerance: float = 1e-2) -> VerificationReport:
    """Monotone decrease of consecutive distances and final closeness.

    A distance counts as decreasing when it is strictly smaller than its
    predecessor or both are zero (to ``1e-12``); Wasserstein distances only
    need to be non-increasing.  Witnesses are level indices.
    """
    rep = VerificationReport()
    names = ("value_decreasing", "value_final", "law_decreasing")
    failed = [k for k, lv in enumerate(report.levels) if lv.error is not None]
    if failed:
        rep.add("levels_solved", False, witness={"level": failed[0],
                                                 "error": report.levels[failed[0]].error})
        for nm in names:
            rep.skip(nm, "a level failed")
        return rep
    if len(report.levels) < 3:
        for nm in names:
            rep.skip(nm, "insufficient data: fewer than 3 levels")
        return rep
    rep.add("levels_solved", True, len(report.levels))
    d = report.value_distances
    bad = [k + 2 for k in range(len(d) - 1)
           if not (d[k + 1] < d[k] or (d[k] <= ZERO_TOL and d[k + 1] <= ZERO_TOL))]
    rep.add("value_decreasing", not bad, max(d[1:]) if len(d) > 1 else 0.0, None,
            {"level": bad[0]} if bad else None)
    rep.add("value_final", d[-1] <= tolerance, d[-1], tolerance, {"level": len(report.levels) - 1})
    w = report.law_distances
    bad = [k + 2 for k in range(len(w) - 1) if w[k + 1] > w[k] + ZERO_TOL]
    rep.add("law_decreasing", not bad, w[-1], None, {"level": bad[0]} if bad else None)
    return rep
