"""Analytic kernel: scale function, r-harmonic pair, exits, Green local time.

The increasing/decreasing solutions of ``1/2 sigma^2 psi'' + mu psi' = r psi``
are integrated in log form.  With ``y = log psi`` and ``z = y'`` the equation
becomes the Riccati system ``y' = z``, ``z' = 2 (r - mu z) / sigma^2 - z^2``,
which never overflows.  ``psi_+`` starts from ``z(lower) = 0`` going right and
``psi_-`` from ``z(upper) = 0`` going left; both are normalised to 1 at the
midpoint.  Exit functionals only involve ratios, so the choice of basis
drops out.

Sojourn primitives around a point ``c`` in a bracket ``(l, u)`` with a clock
of rate ``kappa`` on the local time at ``c`` follow from the elastic-killing
identity ``a = e_up / (1 + kappa g)``, ``b = e_low / (1 + kappa g)``,
``c_kill = kappa g / (1 + kappa g)``.  An independent shooting solve of the
linear ODE with the jump ``v'(c+) - v'(c-) = 2 kappa (v(c) - payoff)`` is kept
as a cross-check and must agree to ``1e-8``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly, CubicHermiteSpline

from .errors import DegenerateBracket, IntegrationBlowup, MethodDisagreement, QuadratureFailure
from .model import DiffusionModel, Grid

DEFAULT_MESH = 2001
RTOL = 1e-13
AGREEMENT_RTOL = 1e-8
AGREEMENT_ATOL = 1e-14

# Sign of the local-time jump condition in the shooting method.  Only a test
# fixture ever flips it, to check that the dual-method gate fires.
_JUMP_SIGN = 1.0


def _mesh(model: DiffusionModel, n: int, extra=None) -> np.ndarray:
    lo, hi = model.lower_bound, model.upper_bound
    keep = np.unique(np.concatenate([[lo, model.midpoint, hi],
                                     [] if extra is None else np.ravel(extra)]))
    keep = keep[(keep >= lo) & (keep <= hi)]
    base = np.linspace(lo, hi, n)
    # drop uniform nodes that nearly coincide with a required point
    k = np.clip(np.searchsorted(keep, base), 1, keep.size - 1)
    gap = np.minimum(np.abs(base - keep[k - 1]), np.abs(base - keep[k]))
    base = base[gap > 1e-3 * (hi - lo) / n]
    return np.union1d(base, keep)


class ScaleFunction:
    """Scale density ``s'(x) = exp(-int_{x0}^x 2 mu / sigma^2)`` and scale ``s``.

    Both are tabulated on a mesh and interpolated by Hermite polynomials that
    use the exact derivatives at the nodes.
    """

    def __init__(self, model: DiffusionModel, mesh: np.ndarray | None = None):
        self.model = model
        x = _mesh(model, DEFAULT_MESH) if mesh is None else np.asarray(mesh, float)
        x0 = model.midpoint
        if x0 not in x:
            x = np.union1d(x, [x0])
        self.mesh = x
        k0 = int(np.searchsorted(x, x0))

        def rhs(t, y):
            mu, sig = model.mu(t), model.sigma(t)
            return [2.0 * mu / sig**2, math.exp(-y[0])]

        lam = np.zeros_like(x)
        s = np.zeros_like(x)
        for span, idx in (((x0, x[-1]), slice(k0, None)), ((x0, x[0]), slice(k0, None, -1))):
            pts = x[idx]
            if pts.size < 2:
                continue
            sol = solve_ivp(rhs, span, [0.0, 0.0], method="DOP853", t_eval=pts,
                            rtol=RTOL, atol=1e-14)
            if not sol.success or not np.all(np.isfinite(sol.y)):
                raise QuadratureFailure(f"scale integral failed on {span}: {sol.message}")
            lam[idx] = sol.y[0]
            s[idx] = sol.y[1]
        self.log_density = lam * -1.0
        dlam = 2.0 * model.mu(x) / model.sigma(x) ** 2
        self._lam = CubicHermiteSpline(x, lam, dlam)
        sp = np.exp(-lam)
        self._s = BPoly.from_derivatives(x, np.column_stack([s, sp, -dlam * sp]))

    def __call__(self, x):
        return self.density(x)

    def density(self, x):
        return np.exp(-self._lam(np.asarray(x, float)))

    def log_density_at(self, x):
        return -self._lam(np.asarray(x, float))

    def scale(self, x):
        return self._s(np.asarray(x, float))


def scale_density(model: DiffusionModel, mesh: np.ndarray | None = None) -> ScaleFunction:
    """Tabulated scale density, normalised to 1 at the interval midpoint."""
    return ScaleFunction(model, mesh)


class HarmonicPair:
    """Positive increasing/decreasing solutions of the r-harmonic equation.

    For ``r > 0`` the pair is stored as log values and log-derivatives on a
    mesh.  For ``r = 0`` it degenerates to ``psi_+ = `` normalised scale
    function (zero at the lower end) and ``psi_- = 1``; ``degenerate`` is then
    set and exits are computed from the scale function directly.
    """

    def __init__(self, model: DiffusionModel, r: float, mesh_points: int = DEFAULT_MESH,
                 extra_points=None):
        if r < 0 or not math.isfinite(r):
            raise ValueError(f"discount rate must be finite and >= 0, got {r!r}")
        self.model = model
        self.r = float(r)
        self.mesh = _mesh(model, mesh_points, extra_points)
        self.scale = ScaleFunction(model, self.mesh)
        self.degenerate = self.r == 0.0
        if not self.degenerate:
            self._solve()

    # construction -----------------------------------------------------------

    def _riccati(self, t, y):
        mu, sig = self.model.mu(t), self.model.sigma(t)
        z = y[1]
        return [z, 2.0 * (self.r - mu * z) / sig**2 - z * z]

    def _integrate(self, start, pts):
        last = None
        for method in ("DOP853", "Radau"):
            sol = solve_ivp(self._riccati, (start, pts[-1]), [0.0, 0.0], method=method,
                            t_eval=pts, rtol=RTOL, atol=1e-13)
            if sol.success and np.all(np.isfinite(sol.y)) and sol.y.shape[1] == pts.size:
                return sol.y
            last = sol
        reached = last.t[-1] if last.t.size else start
        raise IntegrationBlowup(
            f"harmonic integration failed beyond x={reached!r}: {last.message}",
            interval=(float(min(reached, pts[-1])), float(max(reached, pts[-1]))))

    def _solve(self):
        x = self.mesh
        yp = self._integrate(x[0], x)
        ym = self._integrate(x[-1], x[::-1])[:, ::-1]
        k0 = int(np.searchsorted(x, self.model.midpoint))
        self._y = {+1: yp[0] - yp[0, k0], -1: ym[0] - ym[0, k0]}
        self._z = {+1: yp[1], -1: ym[1]}
        mu, sig = self.model.mu(x), self.model.sigma(x)
        self._poly = {}
        for s in (+1, -1):
            z = self._z[s]
            zp = 2.0 * (self.r - mu * z) / sig**2 - z * z
            self._poly[s] = BPoly.from_derivatives(x, np.column_stack([self._y[s], z, zp]))

    # evaluation -------------------------------------------------------------

    def log_psi(self, x, sign: int):
        return self._poly[sign](np.asarray(x, float))

    def dlog_psi(self, x, sign: int):
        return self._poly[sign](np.asarray(x, float), 1)

    def psi_plus(self, x):
        if self.degenerate:
            lo, x0 = self.model.lower_bound, self.model.midpoint
            s = self.scale.scale
            return (s(x) - s(lo)) / (s(x0) - s(lo))
        return np.exp(self.log_psi(x, +1))

    def psi_minus(self, x):
        if self.degenerate:
            return np.ones(np.shape(x))
        return np.exp(self.log_psi(x, -1))

    def residual(self, x=None, sign: int = +1) -> np.ndarray:
        """Relative ODE residual of the interpolated ``psi`` at ``x``.

        The default points are the mesh midpoints, where interpolation error
        is largest.  The residual is scaled by the sum of magnitudes of the
        three terms of the equation.
        """
        if self.degenerate:
            raise ValueError("residual is defined for r > 0 only")
        if x is None:
            x = 0.5 * (self.mesh[1:] + self.mesh[:-1])
        x = np.asarray(x, float)
        z = self._poly[sign](x, 1)
        zz = self._poly[sign](x, 2)
        mu, sig = self.model.mu(x), self.model.sigma(x)
        # divide the equation by psi: 1/2 sigma^2 (y'' + y'^2) + mu y' - r
        t1 = 0.5 * sig**2 * (zz + z * z)
        t2 = mu * z
        return np.abs(t1 + t2 - self.r) / (np.abs(t1) + np.abs(t2) + self.r)

    def wronskian_over_scale(self, x=None) -> np.ndarray:
        """``(psi_+' psi_- - psi_-' psi_+) / s'``, constant in exact arithmetic."""
        x = self.mesh if x is None else np.asarray(x, float)
        if self.degenerate:
            sp = self.scale.density(x)
            lo, x0 = self.model.lower_bound, self.model.midpoint
            return sp / (self.scale.scale(x0) - self.scale.scale(lo)) / sp
        yp, ym = self.log_psi(x, +1), self.log_psi(x, -1)
        zp, zm = self.dlog_psi(x, +1), self.dlog_psi(x, -1)
        return np.exp(yp + ym - self.scale.log_density_at(x)) * (zp - zm)


def solve_harmonic_pair(model: DiffusionModel, r: float, mesh_points: int = DEFAULT_MESH,
                        extra_points=None) -> HarmonicPair:
    return HarmonicPair(model, r, mesh_points, extra_points)


# exits and Green function --------------------------------------------------


def _check_bracket(l, x, u):
    l, x, u = (np.asarray(v, float) for v in (l, x, u))
    if np.any(u <= l):
        raise DegenerateBracket("bracket needs l < u")
    if np.any((x < l) | (x > u)):
        raise DegenerateBracket("point must lie inside the bracket")
    return l, x, u


def _exit_from_pair(pair: HarmonicPair, l, x, u):
    if pair.degenerate:
        s = pair.scale.scale
        sl, sx, su = s(l), s(x), s(u)
        d = su - sl
        return (su - sx) / d, (sx - sl) / d
    yp = {k: pair.log_psi(v, +1) for k, v in (("l", l), ("x", x), ("u", u))}
    ym = {k: pair.log_psi(v, -1) for k, v in (("l", l), ("x", x), ("u", u))}
    h = {k: yp[k] - ym[k] for k in yp}
    dlx, dxu, dlu = h["x"] - h["l"], h["u"] - h["x"], h["u"] - h["l"]
    den = np.expm1(-dlu)
    e_up = np.exp(yp["x"] - yp["u"]) * np.expm1(-dlx) / den
    e_low = np.exp(ym["x"] - ym["l"]) * np.expm1(-dxu) / den
    return e_low, e_up


def discounted_two_sided_exit(model: DiffusionModel, r: float, l, x, u,
                              pair: HarmonicPair | None = None):
    """``(e_low, e_up)``: discounted probabilities of leaving ``(l, u)`` down/up."""
    l, x, u = _check_bracket(l, x, u)
    pair = pair or HarmonicPair(model, r, extra_points=np.atleast_1d(np.concatenate(
        [np.ravel(l), np.ravel(x), np.ravel(u)])))
    e_low, e_up = _exit_from_pair(pair, l, x, u)
    e_low, e_up = np.clip(e_low, 0.0, 1.0), np.clip(e_up, 0.0, 1.0)
    if e_low.ndim == 0:
        return float(e_low), float(e_up)
    return e_low, e_up


def _green_from_pair(pair: HarmonicPair, l, c, u):
    if pair.degenerate:
        s = pair.scale.scale
        sl, sc, su = s(l), s(c), s(u)
        return 2.0 * (sc - sl) * (su - sc) / ((su - sl) * pair.scale.density(c))
    hp = lambda v: pair.log_psi(v, +1) - pair.log_psi(v, -1)
    hl, hc, hu = hp(l), hp(c), hp(u)
    dz = pair.dlog_psi(c, +1) - pair.dlog_psi(c, -1)
    return 2.0 / (dz * (1.0 + 1.0 / np.expm1(hc - hl) + 1.0 / np.expm1(hu - hc)))


def green_local_time(model: DiffusionModel, r: float, l, c, u,
                     pair: HarmonicPair | None = None):
    """Expected discounted local time at ``c`` accumulated before leaving ``(l, u)``.

    Uses the semimartingale normalisation of local time (occupation density
    with respect to ``d<X>``).
    """
    l, c, u = _check_bracket(l, c, u)
    if np.any((c <= l) | (c >= u)):
        raise DegenerateBracket("need l < c < u")
    pair = pair or HarmonicPair(model, r, extra_points=np.concatenate(
        [np.ravel(l), np.ravel(c), np.ravel(u)]))
    g = _green_from_pair(pair, l, c, u)
    return float(g) if np.ndim(g) == 0 else g


# sojourn primitives ---------------------------------------------------------


@dataclass(frozen=True)
class SojournPrimitives:
    """Discounted up/down exit and kill weights around one point."""

    a: float
    b: float
    c_kill: float
    g: float
    kappa: float
    r: float


@dataclass(frozen=True)
class _ShootingBasis:
    """Shooting data at ``c``, all positive so no weight is a difference.

    ``lv`` and ``lw`` are log-derivatives at ``c`` of the solutions vanishing
    at ``l`` and at ``u``; ``inv_down`` and ``inv_up`` are ``1 / z(l)`` and
    ``1 / y(u)`` for the solutions started at ``c`` with value 0 and unit
    slope towards ``l`` and towards ``u``.
    """

    lv: float
    lw: float
    inv_down: float
    inv_up: float

    def solve(self, kappa: float) -> tuple[float, float, float]:
        if math.isinf(kappa):
            return 0.0, 0.0, 1.0
        s2k = 2.0 * _JUMP_SIGN * kappa
        den = self.lv - self.lw + s2k
        return self.inv_up / den, self.inv_down / den, s2k / den


def _shooting_basis(model: DiffusionModel, r: float, l: float, c: float, u: float) -> _ShootingBasis:
    def rhs(t, y):
        mu, sig = model.mu(t), model.sigma(t)
        return [y[1], 2.0 / sig**2 * (r * y[0] - mu * y[1])]

    def shoot(start, end, slope):
        sol = solve_ivp(rhs, (start, end), [0.0, slope], method="DOP853", rtol=1e-12, atol=1e-16)
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegrationBlowup(f"shooting solve failed on ({start}, {end}): {sol.message}",
                                    interval=(min(start, end), max(start, end)))
        return sol.y[:, -1]

    v, w = shoot(l, c, 1.0), shoot(u, c, -1.0)
    z, y = shoot(c, l, -1.0), shoot(c, u, 1.0)
    return _ShootingBasis(v[1] / v[0], w[1] / w[0], 1.0 / z[0], 1.0 / y[0])


def _identity(e_low, e_up, g, kappa):
    if math.isinf(kappa):
        return 0.0, 0.0, 1.0
    den = 1.0 + kappa * g
    return e_up / den, e_low / den, kappa * g / den


def _agree(x, y):
    return abs(x - y) <= AGREEMENT_RTOL * max(abs(x), abs(y)) + AGREEMENT_ATOL


def _compare(ident, ode, where):
    if not all(_agree(x, y) for x, y in zip(ident, ode)):
        raise MethodDisagreement(
            f"sojourn primitives disagree at {where}: identity={ident}, ode={ode}",
            identity=ident, ode=ode)


def sojourn_primitives(model: DiffusionModel, r: float, l: float, c: float, u: float,
                       kappa: float, check: bool = True,
                       pair: HarmonicPair | None = None) -> SojournPrimitives:
    """Sojourn primitives ``(a, b, c_kill, g)`` at one point.

    Parameters
    ----------
    model : DiffusionModel
    r : float
        Discount rate.
    l, c, u : float
        Bracket and killing point, ``l < c < u``.
    kappa : float
        Clock rate on the local time at ``c``; may be ``inf``.
    check : bool
        Also run the shooting solve and raise :class:`MethodDisagreement` if
        the two results differ by more than ``1e-8`` relative.
    """
    if not (l < c < u):
        raise DegenerateBracket(f"need l < c < u, got ({l}, {c}, {u})")
    if kappa < 0 or math.isnan(kappa):
        raise ValueError("kappa must be in [0, inf]")
    pair = pair or HarmonicPair(model, r, extra_points=[l, c, u])
    e_low, e_up = (float(v) for v in _exit_from_pair(pair, l, c, u))
    g = float(_green_from_pair(pair, l, c, u))
    ident = _identity(e_low, e_up, g, kappa)
    if check:
        _compare(ident, _shooting_basis(model, r, l, c, u).solve(kappa), (l, c, u, r, kappa))
    return SojournPrimitives(*ident, g=g, kappa=float(kappa), r=float(r))


def sojourn_primitives_ode(model: DiffusionModel, r: float, l: float, c: float, u: float,
                           kappa: float) -> tuple[float, float, float]:
    """``(a, b, c_kill)`` from the shooting method alone."""
    if not (l < c < u):
        raise DegenerateBracket(f"need l < c < u, got ({l}, {c}, {u})")
    return _shooting_basis(model, r, l, c, u).solve(kappa)


class GridKernel:
    """Sojourn data for every interior grid point at one discount rate.

    Stores ``e_up``, ``e_low`` (exits to the neighbouring grid points) and the
    Green local time ``G``; any kill rate then follows in closed form.  With
    ``check=True`` every point is cross-checked against the shooting method
    at ``kappa = 0`` and ``kappa = 1 / G``.
    """

    def __init__(self, model: DiffusionModel, grid: Grid, r: float, check: bool = True,
                 pair: HarmonicPair | None = None):
        self.model, self.grid, self.r = model, grid, float(r)
        pts = grid.points
        mesh_n = max(DEFAULT_MESH, 10 * pts.size + 1)
        self.pair = pair or HarmonicPair(model, r, mesh_n, extra_points=pts)
        l, c, u = pts[:-2], pts[1:-1], pts[2:]
        e_low, e_up = _exit_from_pair(self.pair, l, c, u)
        self.clamped = int(np.sum((e_low <= 0) | (e_up <= 0)))
        self.e_low = np.clip(e_low, 0.0, 1.0)
        self.e_up = np.clip(e_up, 0.0, 1.0)
        self.G = np.asarray(_green_from_pair(self.pair, l, c, u), float)
        for arr in (self.e_low, self.e_up, self.G):
            arr.setflags(write=False)
        if check:
            self.cross_check()

    def cross_check(self, kappas=None) -> None:
        pts = self.grid.points
        for j in range(self.grid.n_interior):
            basis = _shooting_basis(self.model, self.r, pts[j], pts[j + 1], pts[j + 2])
            for kappa in (kappas if kappas is not None else (0.0, 1.0 / self.G[j])):
                ident = _identity(self.e_low[j], self.e_up[j], self.G[j], kappa)
                _compare(ident, basis.solve(kappa), (pts[j], pts[j + 1], pts[j + 2], self.r, kappa))

    def primitives(self, kappa):
        """``(a, b, c_kill)`` arrays for per-point kill rates (``inf`` allowed)."""
        kappa = np.broadcast_to(np.asarray(kappa, float), self.G.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            units = np.where(np.isinf(kappa), 1.0, kappa / (1.0 + np.where(np.isinf(kappa), 0.0, kappa)))
        return self.primitives_units(units)

    def primitives_units(self, units):
        """Same as :meth:`primitives` with the kill rate in unit form."""
        u = np.asarray(units, float)
        den = (1.0 - u) + self.G * u
        return self.e_up * (1.0 - u) / den, self.e_low * (1.0 - u) / den, self.G * u / den

    @cached_property
    def total_exit(self) -> np.ndarray:
        return self.e_up + self.e_low
