"""Solitonic metric profile for one-dimensional fibres and Monge-Ampere residuals.

In moment coordinates the reduced Monge-Ampere equation for ``m = 1`` reads
``log phi + log P(x) + lam x + u + C = 0`` with ``phi = u''`` and ``x = u'``
(derivatives in the fibre coordinate ``t``). Differentiating once in ``t``
gives the linear ODE ``(P phi)' + lam P phi + x P = 0`` in ``x``, solved here
in closed form:

    psi(x) = P(x) phi(x) = -exp(-lam x) int_{x_min}^x s P(s) exp(lam s) ds.

The terminal condition ``psi(x_max) = 0`` is the vanishing of the first
weighted moment, so it holds exactly when ``lam`` is the soliton vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .basedata import WeightFormSet
from .errors import (
    ClosureFailure,
    DimensionMismatch,
    GradientOutOfPolytope,
    NonPositiveProfile,
    NotFano,
    SingularHessian,
)

_GL_LO = leggauss(10)
_GL_HI = leggauss(21)
_GL_SHORT = leggauss(24)


def _gl(f, a, b, rule):
    """Gauss-Legendre on many panels at once; ``a``, ``b`` are arrays."""
    nodes, weights = rule
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    s = mid[:, None] + half[:, None] * nodes[None, :]
    return half * (f(s) * weights).sum(axis=1)


def adaptive_panels(f, a, b, abs_tol: float, max_depth: int = 40) -> np.ndarray:
    """Integrals of vectorised ``f`` over panels ``[a_k, b_k]``.

    Each panel is accepted when a 10-point and a 21-point Gauss-Legendre
    estimate agree within its share of ``abs_tol``; otherwise it is bisected.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total_len = float(np.abs(b - a).sum()) or 1.0
    idx = np.arange(a.size)
    lo, hi = a.ravel().copy(), b.ravel().copy()
    acc = np.zeros(a.size)
    for _ in range(max_depth):
        if idx.size == 0:
            break
        coarse = _gl(f, lo, hi, _GL_LO)
        fine = _gl(f, lo, hi, _GL_HI)
        share = abs_tol * np.abs(hi - lo) / total_len
        ok = np.abs(fine - coarse) <= np.maximum(share, 1e-300)
        np.add.at(acc, idx[ok], fine[ok])
        idx, lo, hi = idx[~ok], lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        idx = np.concatenate([idx, idx])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    if idx.size:
        np.add.at(acc, idx, _gl(f, lo, hi, _GL_HI))
    return acc.reshape(a.shape)


@dataclass
class Profile1D:
    """Sampled metric profile on a uniform grid in the moment coordinate.

    ``phi`` is ``u''`` expressed in ``x``; ``u`` and ``t`` are infinite at
    the two endpoints, where the fibre degenerates.
    """

    x: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    t: np.ndarray
    psi: np.ndarray
    lam: float
    c_lambda: float
    forms: WeightFormSet = field(repr=False)
    closure_defect: float = 0.0

    @property
    def n_grid(self) -> int:
        return self.x.size

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @property
    def x_mid(self) -> float:
        return 0.5 * (self.x_min + self.x_max)

    def weight(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.forms.evaluate(x[..., None])

    def psi_at(self, s) -> np.ndarray:
        """``P phi`` at arbitrary points, propagated from the nearest grid node
        on the side of the midpoint (so both ends keep relative accuracy)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lam = self.lam
        i = np.clip(np.searchsorted(self.x, s, side="right") - 1, 0, self.n_grid - 2)
        left = s <= self.x_mid
        out = np.empty_like(s)
        fw = self.forms

        def integrand_from(ref):
            def f(sig):
                return sig * fw.evaluate(sig[..., None]) * np.exp(lam * (sig - ref[:, None]))
            return f

        if np.any(left):
            sl, il = s[left], i[left]
            xl = self.x[il]
            part = _gl(integrand_from(sl), xl, sl, _GL_SHORT)
            out[left] = np.exp(-lam * (sl - xl)) * self.psi[il] - part
        if np.any(~left):
            sr, ir = s[~left], i[~left] + 1
            xr = self.x[ir]
            part = _gl(integrand_from(sr), sr, xr, _GL_SHORT)
            out[~left] = np.exp(lam * (xr - sr)) * self.psi[ir] + part
        return out

    def phi_at(self, s) -> np.ndarray:
        return self.psi_at(s) / self.weight(s)

    def u_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return -self.c_lambda - self.lam * s - np.log(self.psi_at(s))

    def records(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.x.tolist(), self.phi.tolist(), self.u.tolist(), self.t.tolist()))


@dataclass(frozen=True)
class ResidualReport:
    sup_norm: float
    l2_norm: float
    worst_point: tuple[float, ...]
    n_points: int
    spacing: tuple[float, ...]
    region: tuple[tuple[float, float], ...]


def _check_forms_1d(W: WeightFormSet | None) -> WeightFormSet:
    if W is None:
        return WeightFormSet(1, np.zeros((0, 1)), np.zeros(0))
    if W.dim != 1:
        raise DimensionMismatch(f"one-dimensional profile needs forms of dimension 1, got {W.dim}")
    return W


def solve_profile(
    interval,
    W: WeightFormSet | None,
    lam: float,
    c_lambda: float,
    n_grid: int = 2048,
    closure_tol: float = 1e-9,
    quad_tol: float = 1e-13,
) -> Profile1D:
    """Closed-form solution of the one-dimensional reduced Monge-Ampere equation.

    ``psi`` is accumulated from adaptive panel integrals on the grid, from the
    left end for ``x <= x_c`` and from the right end (minus the total moment)
    beyond, with ``x_c`` the midpoint. ``u`` follows from the log form of the
    equation and ``t(x) = int_{x_c}^x ds / phi`` with ``t(x_c) = 0``.

    Raises
    ------
    NotFano
        A weight form is not positive on the interval.
    ClosureFailure
        ``|psi(x_max)| > closure_tol * max psi``: ``lam`` does not balance the interval.
    NonPositiveProfile
        ``psi <= 0`` at an interior grid point.
    """
    x_min, x_max = (float(v) for v in interval)
    if not x_min < 0 < x_max:
        raise ValueError(f"interval must contain the origin in its interior, got [{x_min}, {x_max}]")
    if n_grid < 4:
        raise ValueError("n_grid must be >= 4")
    W = _check_forms_1d(W)
    lam = float(np.asarray(lam, dtype=float).reshape(-1)[0])
    c_lambda = float(c_lambda)
    if len(W):
        ends = W.affine_values(np.array([[x_min], [x_max]]))
        if ends.min() <= 0:
            raise NotFano(f"weight form not positive on [{x_min}, {x_max}] (min {ends.min():.6g})")

    x = np.linspace(x_min, x_max, n_grid)
    x_ref = 0.5 * (x_min + x_max)

    def moment_density(s):
        return s * W.evaluate(s[..., None]) * np.exp(lam * (s - x_ref))

    scale = max(-x_min, x_max) * float(W.evaluate(x[:, None]).max()) * math.exp(0.5 * abs(lam) * (x_max - x_min))
    Q = adaptive_panels(moment_density, x[:-1], x[1:], quad_tol * scale * (x_max - x_min))
    # extended-precision partial sums keep the two halves consistent at x_ref
    Qe = Q.astype(np.longdouble)
    total = Qe.sum()
    fwd = np.concatenate([[0.0], np.cumsum(Qe)])
    bwd = np.concatenate([np.cumsum(Qe[::-1])[::-1], [0.0]])
    rescale = np.exp(lam * (x_ref - x))
    psi = np.where(x <= x_ref, -fwd, bwd - total).astype(float) * rescale
    psi[0] = 0.0

    closure = float(psi[-1])
    peak = float(psi.max())
    if not peak > 0 or abs(closure) > closure_tol * peak:
        raise ClosureFailure(
            f"|psi(x_max)| = {abs(closure):.3e} exceeds {closure_tol:g} * max psi = {closure_tol * peak:.3e}"
        )
    interior = psi[1:-1]
    if np.any(interior <= 0):
        k = int(np.flatnonzero(interior <= 0)[0]) + 1
        raise NonPositiveProfile(f"psi <= 0 at interior grid point x = {x[k]:.17g}")

    P = W.evaluate(x[:, None])
    phi = psi / P
    u = np.full(n_grid, np.inf)
    u[1:-1] = -c_lambda - lam * x[1:-1] - np.log(psi[1:-1])

    profile = Profile1D(x, phi, u, np.zeros(n_grid), psi, lam, c_lambda, W, closure)
    profile.t = _coordinate_map(profile, quad_tol)
    return profile


def _coordinate_map(p: Profile1D, quad_tol: float) -> np.ndarray:
    """``t(x_i) = int_{x_c}^{x_i} ds / phi(s)`` on the interior nodes."""
    x = p.x
    xc = p.x_mid

    def inv_phi(s):
        return 1.0 / p.phi_at(s.ravel()).reshape(s.shape)

    t = np.empty(p.n_grid)
    t[0], t[-1] = -np.inf, np.inf
    inner = x[1:-1]
    # panels between consecutive interior nodes plus the one straddling x_c
    right = inner[inner > xc]
    left = inner[inner <= xc]
    scale = float(np.abs(1.0 / p.phi[1:-1]).max()) * (p.x_max - p.x_min)
    if right.size:
        a = np.concatenate([[xc], right[:-1]])
        seg = adaptive_panels(inv_phi, a, right, quad_tol * scale)
        t[1:-1][inner > xc] = np.cumsum(seg)
    if left.size:
        b = np.concatenate([left[1:], [xc]])
        seg = adaptive_panels(inv_phi, left, b, quad_tol * scale)
        t[1:-1][inner <= xc] = -np.cumsum(seg[::-1])[::-1]
    return t


def boundary_slope_check(p: Profile1D) -> dict:
    """One-sided endpoint slopes of ``phi`` against ``phi'(x_end) = -x_end``.

    ``pass`` is true when both slopes are within ``10 / n_grid`` relative. A
    failure on a coarse grid is a resolution artefact, not a property of the
    equation.
    """
    h = p.spacing
    slope_min = (p.phi[1] - p.phi[0]) / h
    slope_max = (p.phi[-1] - p.phi[-2]) / h
    exp_min, exp_max = -p.x_min, -p.x_max
    rtol = 10.0 / p.n_grid
    ok = abs(slope_min - exp_min) <= rtol * abs(exp_min) and abs(slope_max - exp_max) <= rtol * abs(exp_max)
    return {
        "slope_min": float(slope_min),
        "slope_max": float(slope_max),
        "expected_min": float(exp_min),
        "expected_max": float(exp_max),
        "pass": bool(ok),
    }


def ma_residual_1d(p: Profile1D, W: WeightFormSet | None = None, collar_cells: int = 3) -> ResidualReport:
    """Log-form residual ``log phi + log P + lam x + u + C`` on the interior collar.

    The Hessian is read from the profile's ``phi`` column (``u'' = phi``), so
    the residual tests a candidate ``(phi, u)`` pair against the equation.
    """
    W = _check_forms_1d(W if W is not None else p.forms)
    h = p.spacing
    eps = collar_cells * h
    # node-index collar, immune to rounding in x
    mask = np.zeros(p.n_grid, dtype=bool)
    mask[collar_cells : p.n_grid - collar_cells] = True
    x = p.x[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.log(p.phi[mask]) + np.log(W.evaluate(x[:, None])) + p.lam * x + p.u[mask] + p.c_lambda
    R = np.where(np.isfinite(R), R, np.inf)
    k = int(np.argmax(np.abs(R)))
    return ResidualReport(
        sup_norm=float(np.abs(R).max()),
        l2_norm=float(math.sqrt(h * math.fsum(R * R))),
        worst_point=(float(x[k]),),
        n_points=int(x.size),
        spacing=(h,),
        region=((p.x_min + eps, p.x_max - eps),),
    )


def potential_on_t_grid(p: Profile1D, t: np.ndarray, rtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Sample the potential ``u`` at given fibre coordinates ``t``.

    ``x(t)`` solves ``dx/dt = phi(x)`` from ``x(0) = x_c``. The integrator
    only seeds ``x(t)``; Newton sweeps on ``int_{x_{k-1}}^{x_k} ds / phi =
    t_k - t_{k-1}`` between consecutive samples then polish it.

    ``u`` is accumulated from ``u(0)`` through the increments
    ``int x dt = int x / phi dx`` in extended precision, so its sample-to-sample
    noise stays far below what second differences would amplify. Returns
    ``(x(t), u(t))`` with ``u`` as ``np.longdouble``.
    """
    t = np.asarray(t, dtype=float)
    xs = np.empty_like(t)
    us = np.empty(t.shape, dtype=np.longdouble)
    u0 = np.longdouble(p.u_at(p.x_mid)[0])

    def rhs(_, y):
        return p.phi_at(y)

    def inv_phi(s):
        return 1.0 / p.phi_at(s.ravel()).reshape(s.shape)

    def x_over_phi(s):
        return s / p.phi_at(s.ravel()).reshape(s.shape)

    for sel in (t >= 0, t < 0):
        if not np.any(sel):
            continue
        tt = t[sel]
        order = np.argsort(np.abs(tt))
        span = (0.0, float(tt[order[-1]]))
        sol = solve_ivp(rhs, span, [p.x_mid], method="DOP853", rtol=rtol, atol=1e-15,
                        t_eval=tt[order], dense_output=False)
        if not sol.success:
            raise ArithmeticError(f"fibre-coordinate integration failed: {sol.message}")
        path = np.concatenate([[p.x_mid], sol.y[0]])
        steps = np.diff(np.concatenate([[0.0], tt[order]]))
        for _ in range(3):
            lag = np.cumsum(steps - _gl(inv_phi, path[:-1], path[1:], _GL_SHORT))
            path[1:] += p.phi_at(path[1:]) * lag
        # t - t(x) left after rounding x; du/dt = x turns it into a correction of u
        lag = np.cumsum(steps - _gl(inv_phi, path[:-1], path[1:], _GL_SHORT))
        rise = _gl(x_over_phi, path[:-1], path[1:], _GL_SHORT).astype(np.longdouble)
        xv, uv = np.empty(tt.size), np.empty(tt.size, dtype=np.longdouble)
        xv[order] = path[1:]
        uv[order] = u0 + np.cumsum(rise) + (path[1:] * lag).astype(np.longdouble)
        xs[sel], us[sel] = xv, uv
    return xs, us


def ma_residual_grid(
    u_samples: np.ndarray,
    axes,
    lam,
    c_lambda: float,
    W: WeightFormSet | None,
    P,
    return_field: bool = False,
):
    """Residual ``log det D^2u + log P(grad u) + lam . grad u + u + C`` on a uniform grid.

    ``axes`` are the (uniform) coordinate vectors of the grid in ``t``-space;
    derivatives are central differences, and the residual is reported over
    points with a complete stencil. With ``return_field`` the pointwise
    residual on those points is returned alongside the report.

    Raises
    ------
    GradientOutOfPolytope
        ``grad u`` leaves the interior of the polytope at some grid point.
    SingularHessian
        The difference Hessian is not positive definite at some grid point.
    """
    u = np.asarray(u_samples)
    # differences are taken in the precision of the samples
    if u.dtype != np.longdouble:
        u = u.astype(float)
    axes = [np.asarray(a, dtype=float) for a in axes]
    m = len(axes)
    if u.ndim != m or any(u.shape[k] != axes[k].size for k in range(m)):
        raise DimensionMismatch("u_samples shape does not match the axes")
    if P.dim != m:
        raise DimensionMismatch(f"polytope dimension {P.dim} != grid dimension {m}")
    lam = np.asarray(lam, dtype=float).reshape(m)
    if W is None:
        W = WeightFormSet(m, np.zeros((0, m)), np.zeros(0))
    h = np.array([a[1] - a[0] for a in axes])
    for k, a in enumerate(axes):
        if a.size < 3 or not np.allclose(np.diff(a), h[k], rtol=1e-9, atol=0):
            raise ValueError(f"axis {k} is not a uniform grid with >= 3 points")

    core = tuple(slice(1, -1) for _ in range(m))

    def shifted(offsets):
        return u[tuple(slice(1 + o, u.shape[k] - 1 + o) for k, o in enumerate(offsets))]

    zero = [0] * m
    grad = np.empty(u[core].shape + (m,))
    hess = np.empty(u[core].shape + (m, m))
    for i in range(m):
        e = list(zero)
        e[i] = 1
        up, dn = shifted(e), shifted([-v for v in e])
        grad[..., i] = (up - dn) / (2 * h[i])
        hess[..., i, i] = (up - 2 * u[core] + dn) / h[i] ** 2
        for j in range(i + 1, m):
            pp = list(zero); pp[i] = 1; pp[j] = 1
            pm = list(zero); pm[i] = 1; pm[j] = -1
            mp = list(zero); mp[i] = -1; mp[j] = 1
            mm = list(zero); mm[i] = -1; mm[j] = -1
            mixed = (shifted(pp) - shifted(pm) - shifted(mp) + shifted(mm)) / (4 * h[i] * h[j])
            hess[..., i, j] = hess[..., j, i] = mixed

    inside = P.contains(grad, strict=True)
    if not np.all(inside):
        bad = np.argwhere(~inside)[0]
        raise GradientOutOfPolytope(f"grad u = {grad[tuple(bad)]} outside the polytope interior")
    flat_h = hess.reshape(-1, m, m)
    eig_min = np.linalg.eigvalsh(flat_h)[:, 0]
    if np.any(eig_min <= 0):
        k = int(np.flatnonzero(eig_min <= 0)[0])
        raise SingularHessian(f"difference Hessian not positive definite (min eigenvalue {eig_min[k]:.3e})")
    _, logdet = np.linalg.slogdet(flat_h)
    g = grad.reshape(-1, m)
    Pv = W.evaluate(g)
    if np.any(Pv <= 0):
        raise NotFano("weight not positive at grad u")
    R = logdet + np.log(Pv) + g @ lam + u[core].ravel().astype(float) + c_lambda
    k = int(np.argmax(np.abs(R)))
    coords = np.meshgrid(*[a[1:-1] for a in axes], indexing="ij")
    worst = tuple(float(c.ravel()[k]) for c in coords)
    cell = float(np.prod(h))
    report = ResidualReport(
        sup_norm=float(np.abs(R).max()),
        l2_norm=float(math.sqrt(cell * math.fsum(R * R))),
        worst_point=worst,
        n_points=int(R.size),
        spacing=tuple(float(v) for v in h),
        region=tuple((float(a[1]), float(a[-2])) for a in axes),
    )
    if return_field:
        return report, R.reshape(u[core].shape)
    return report


@dataclass(frozen=True)
class ConvergenceStudy:
    sizes: tuple[int, ...]
    sup_norms: tuple[float, ...]
    orders: tuple[float, ...]
    t_box: tuple[float, float]


def residual_convergence(
    p: Profile1D,
    W: WeightFormSet | None,
    P,
    sizes=(512, 1024, 2048, 4096),
    half_width: float | None = None,
) -> ConvergenceStudy:
    """Observed order of the difference residual under grid doubling.

    ``u`` is resampled on uniform grids over ``[-T, T]`` in ``t`` and fed to
    :func:`ma_residual_grid`. The sup norm at every level is taken over the
    interior nodes of the coarsest grid, which all finer grids contain, so
    the measured point set does not drift with ``h``. By default ``T`` is
    the largest multiple of 1/8 keeping the box inside the inner 90% of the
    interval. ``orders[k] = log2(sup_k / sup_{k+1})``.
    """
    sizes = tuple(int(n) for n in sizes)
    if half_width is None:
        span = p.x_max - p.x_min
        inner = p.x[1:-1]
        ends = np.interp([p.x_min + 0.05 * span, p.x_max - 0.05 * span], inner, p.t[1:-1])
        # a multiple of 1/8 makes every node an exact binary fraction, so
        # the spacing seen by the difference stencil is exactly uniform
        half_width = math.floor(8.0 * float(min(-ends[0], ends[1]))) / 8.0
    sups = []
    for n in sizes:
        t = np.linspace(-half_width, half_width, n + 1)
        _, u = potential_on_t_grid(p, t)
        _, R = ma_residual_grid(u, [t], p.lam, p.c_lambda, W, P, return_field=True)
        stride = n // sizes[0]
        # core index j is node j + 1; coarse interior nodes are multiples of stride
        sups.append(float(np.abs(R[stride - 1 :: stride][: sizes[0] - 1]).max()))
    orders = tuple(float(np.log2(a / b)) for a, b in zip(sups[:-1], sups[1:]))
    return ConvergenceStudy(sizes, tuple(sups), orders, (-half_width, half_width))
