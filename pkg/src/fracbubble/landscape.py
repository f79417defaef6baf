"""Reduced functional on the (mu, xi) manifold: quadrature, asymptotics,
threshold slab, and critical-point selection.

The reduced functional is an integral over the weight support only, so it is
evaluated by dedicated quadrature on the bump geometry, never on the periodic
grid; that is what makes 40-octave dilation sweeps cheap and accurate.  In
dimension one the integral is done in the scaled variable directly; in higher
dimensions it is reduced to a radial integral against per-bump spherical
means, which are piecewise-polynomial and integrate exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bubble import BubblePoint, bubble_moment, sphere_area
from .errors import (
    AmbiguousRegime,
    FitRejected,
    NoInteriorCriticalPoint,
    QuadratureNotConverged,
    SlabNotCertified,
)
from .model import CompactWeight, ProblemParams, weight_support_box

_GL = {m: leggauss(m) for m in (24, 32, 48)}


@dataclass(frozen=True)
class GammaSample:
    mu: float
    xi: tuple[float, ...]
    gamma: float
    grad: tuple[float, ...]  # (d/dmu, d/dxi_1, ..., d/dxi_n)


@dataclass(frozen=True)
class SlabSpec:
    mu1: float
    mu2: float
    R: float
    B: float
    mu0: float
    xi0: tuple[float, ...]
    boundary_max: float


@dataclass(frozen=True)
class RateFit:
    samples: tuple[tuple[float, float], ...]
    slope: float
    r2: float
    expected: float


@dataclass(frozen=True)
class CriticalPoint:
    mu: float
    xi: tuple[float, ...]
    kind: str  # "max" or "min"
    gamma: float
    grad_norm: float
    on_boundary: bool


# -- quadrature engine --------------------------------------------------------

def _panels(fn, edges, order=32):
    xg, wg = _GL[order]
    a, b = edges[:-1, None], edges[1:, None]
    t = 0.5 * (a + b) + 0.5 * (b - a) * xg[None, :]
    return float(np.sum(0.5 * (b - a) * wg[None, :] * fn(t)))


def _geom_edges(lo: float, hi: float, per_octave: int) -> np.ndarray:
    """Panel edges on [lo, hi]: linear up to 1, geometric beyond."""
    hi = max(hi, lo + 1e-300)
    pieces = [np.array([lo])]
    if lo < 1.0:
        pieces.append(np.linspace(lo, min(1.0, hi), 9)[1:])
    if hi > 1.0:
        start = max(lo, 1.0)
        octs = max(2, int(np.ceil(np.log2(hi / start))) * per_octave)
        pieces.append(start * np.geomspace(1.0, hi / start, octs)[1:])
    return np.unique(np.concatenate(pieces))


def _gamma_1d(mu, xi, h, params, per_octave, want_grad):
    """Scaled-variable quadrature for n = 1."""
    a = BubblePoint.at(params, 1.0).alpha
    m = (1.0 - 2.0 * params.s) / 2.0
    q = params.q
    gs = params.gamma_s

    def zq1(y):
        return a ** (q + 1.0) * (1.0 + y * y) ** (-gs)

    def zq(y):
        return a ** q * (1.0 + y * y) ** (-m * q)

    def zbar(y):
        return a * (1.0 + y * y) ** (-m)

    def zbar_d(y):
        return -m * a * (1.0 + y * y) ** (-m - 1.0)

    val = 0.0
    gmu = 0.0
    gxi = 0.0
    scale_abs = 0.0
    for b in h.bumps:
        c = b.c[0]
        ya, yb = (c - b.r - xi[0]) / mu, (c + b.r - xi[0]) / mu
        ymax = max(abs(ya), abs(yb), 1.0)
        ladder = _geom_edges(1e-3, ymax, per_octave)
        inner = np.concatenate([[0.0], ladder, -ladder])
        edges = np.unique(np.concatenate(
            [[ya, yb], inner[(inner > ya) & (inner < yb)]]))

        def hh(y):
            return b.profile(np.abs(mu * y + xi[0] - c))
        part = _panels(lambda y: hh(y) * zq1(y), edges)
        val += part
        scale_abs += abs(part)
        if want_grad:
            gmu += _panels(
                lambda y: hh(y) * zq(y)
                * (-m * zbar(y) - 2.0 * y * y * zbar_d(y)), edges)
            gxi += _panels(lambda y: hh(y) * zq(y) * (-2.0) * y * zbar_d(y),
                           edges)
    scale = mu ** (1.0 - gs) / (q + 1.0)
    dscale = mu ** (1.0 - m * (q + 1.0) - 1.0)
    return val * scale, (gmu * dscale, gxi * dscale), scale_abs * scale


def _sphere_mean(bump, d: float, t: float, n: int, moment: bool):
    """Spherical average of a bump over the sphere of radius t at distance d.

    With moment=True returns the first angular moment along the unit vector
    pointing from the sphere center to the bump center.  The integrand is a
    polynomial of |x-c|^2 away from the support edge, so Gauss-Legendre with
    a split at the edge crossing is exact.
    """
    if t == 0.0:
        return bump.profile(d) if not moment else 0.0
    if d == 0.0:
        return bump.profile(t) if not moment else 0.0
    xg, wg = _GL[24]
    cstar = (d * d + t * t - bump.r ** 2) / (2.0 * d * t)
    total = 0.0
    if n == 3:
        # integrate over cc = cos(angle to the bump direction); density 1/2
        cuts = [-1.0, 1.0]
        if -1.0 < cstar < 1.0:
            cuts.insert(1, cstar)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            cc = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            ww = 0.5 * (hi - lo) * wg
            u = np.sqrt(np.maximum(d * d + t * t - 2.0 * d * t * cc, 0.0))
            f = bump.profile(u)
            if moment:
                f = f * cc
            total += 0.5 * float(np.sum(ww * f))
        return total
    # n == 2: integrate the angle itself (the cosine substitution has an
    # endpoint-singular density that defeats Gauss-Legendre)
    cuts = [0.0, np.pi]
    if -1.0 < cstar < 1.0:
        cuts.insert(1, float(np.arccos(cstar)))
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        th = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
        ww = 0.5 * (hi - lo) * wg
        cc = np.cos(th)
        u = np.sqrt(np.maximum(d * d + t * t - 2.0 * d * t * cc, 0.0))
        f = bump.profile(u)
        if moment:
            f = f * cc
        total += float(np.sum(ww * f)) / np.pi
    return total


def _gamma_radial(mu, xi, h, params, per_octave, want_grad):
    """Radial reduction against spherical bump means, n >= 2."""
    n, q, gs = params.n, params.q, params.gamma_s
    a = BubblePoint.at(params, 1.0).alpha
    m = (n - 2.0 * params.s) / 2.0
    area = sphere_area(n)
    xi_arr = np.asarray(xi, dtype=float)
    geo = []
    for b in h.bumps:
        d = float(np.sqrt(np.sum((np.asarray(b.c) - xi_arr) ** 2)))
        geo.append((b, d, (np.asarray(b.c) - xi_arr) / d if d > 0 else
                    np.zeros(n)))
    shells = []
    for b, d, _ in geo:
        shells += [max(d - b.r, 0.0) / mu, (d + b.r) / mu]
    rho_max = max(shells) if shells else 1.0
    edges = np.unique(np.concatenate(
        [_geom_edges(0.0, max(rho_max, 1.0), per_octave),
         np.asarray([e for e in shells if e > 0])]))

    def sum_means(rho, moment):
        out = np.zeros((len(geo),) + rho.shape)
        for i, (b, d, _) in enumerate(geo):
            flat = rho.ravel()
            vals = np.array([_sphere_mean(b, d, mu * rr, n, moment)
                             for rr in flat])
            out[i] = vals.reshape(rho.shape)
        return out

    def zq1(rho):
        return a ** (q + 1.0) * (1.0 + rho * rho) ** (-gs)

    def zq(rho):
        return a ** q * (1.0 + rho * rho) ** (-m * q)

    def zbar(rho):
        return a * (1.0 + rho * rho) ** (-m)

    def zbar_d(rho):
        return -m * a * (1.0 + rho * rho) ** (-m - 1.0)

    pref = area * mu ** (n - gs) / (q + 1.0)
    parts = [pref * _panels(
        lambda rho: zq1(rho) * rho ** (n - 1.0) * sum_means(rho, False)[i],
        edges) for i in range(len(geo))]
    val = float(np.sum(parts))
    scale_abs = float(np.sum(np.abs(parts)))
    if not want_grad:
        return val, (0.0,) * (n + 1), scale_abs
    dscale = area * mu ** (n - m * (q + 1.0) - 1.0)
    gmu = dscale * _panels(
        lambda rho: zq(rho) * (-m * zbar(rho) - 2.0 * rho ** 2 * zbar_d(rho))
        * rho ** (n - 1.0) * np.sum(sum_means(rho, False), axis=0), edges)
    gxi = []
    mom_cache = {}

    def mom(rho):
        key = rho.tobytes()
        if key not in mom_cache:
            mom_cache[key] = sum_means(rho, True)
        return mom_cache[key]
    for j in range(n):
        def f(rho, j=j):
            mm = mom(rho)
            proj = sum(geo[i][2][j] * mm[i] for i in range(len(geo)))
            return zq(rho) * (-2.0) * zbar_d(rho) * rho ** n * proj
        gxi.append(dscale * _panels(f, edges))
    return val, (gmu, *gxi), scale_abs


def gamma(mu: float, xi, h: CompactWeight, params: ProblemParams,
          want_grad: bool = True, rtol: float = 1e-8) -> GammaSample:
    """Reduced functional and gradient at one manifold point.

    Two refinement levels must agree to rtol, otherwise the quadrature is
    rejected.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    xi = tuple(float(t) for t in np.atleast_1d(xi))
    engine = _gamma_1d if params.n == 1 else _gamma_radial
    v1, g1, _ = engine(mu, xi, h, params, 4, want_grad)
    v2, g2, scale_abs = engine(mu, xi, h, params, 8, want_grad)
    # gauge against the absolute mass so antisymmetric cancellations pass
    scale = max(scale_abs, 1e-300)
    if abs(v1 - v2) > rtol * scale:
        raise QuadratureNotConverged(
            f"gamma({mu}, {xi}) refinement moved {abs(v1 - v2) / scale:.2e}")
    return GammaSample(mu=mu, xi=xi, gamma=v2, grad=tuple(g2))


# -- asymptotics --------------------------------------------------------------

@dataclass(frozen=True)
class SmallMuReport:
    regime: str                  # "limit" or "divergence"
    limit: Optional[float]       # extrapolated limit (supercritical only)
    predicted: Optional[float]   # weight(xi0)/(q+1) * moment
    samples: tuple[tuple[float, float], ...]
    monotone: bool
    growth_ratio: float
    verdict: str


def small_mu_limit(xi0, h: CompactWeight, params: ProblemParams,
                   jrange: Optional[tuple[int, int]] = None) -> SmallMuReport:
    """Behavior of gamma/mu^{n-gamma_s} as mu -> 0 at a fixed center.

    Supercritical exponent: extrapolates the finite limit on the exponent
    ladder delta = (n-2s)(q+1) - n and compares with the moment prediction.
    Sublinear: certifies monotone unbounded growth along the sweep, which
    needs the wider window starting at 2^-4.
    """
    if jrange is None:
        jrange = (8, 13) if params.supercritical_q else (4, 12)
    xi0 = tuple(float(t) for t in np.atleast_1d(xi0))
    hx = float(h(np.asarray(xi0)))
    n, q = params.n, params.q
    pw = n - params.gamma_s
    js = np.arange(jrange[0], jrange[1] + 1)
    mus = 2.0 ** (-js.astype(float))
    F = np.array([gamma(m, xi0, h, params, want_grad=False).gamma / m ** pw
                  for m in mus])
    if abs(hx) < 1e-12 and (np.min(F) < 0.0 < np.max(F)):
        raise AmbiguousRegime(
            "weight vanishes at the center and the scaled values change sign")
    mono = bool(np.all(np.diff(F) > 0)) if F[0] > 0 else bool(
        np.all(np.diff(F) < 0))
    ratio = float(F[-1] / F[0]) if F[0] != 0 else np.inf
    if params.supercritical_q:
        delta = (n - 2.0 * params.s) * (q + 1.0) - n
        M = np.vstack([np.ones_like(mus)] + [mus ** (delta * t)
                                             for t in (1, 2, 3)]).T
        coef = np.linalg.lstsq(M, F, rcond=None)[0]
        pred = hx / (q + 1.0) * bubble_moment(params)
        return SmallMuReport(
            regime="limit", limit=float(coef[0]), predicted=pred,
            samples=tuple(zip(map(float, mus), map(float, F))),
            monotone=mono, growth_ratio=ratio,
            verdict="finite limit")
    return SmallMuReport(
        regime="divergence", limit=None, predicted=None,
        samples=tuple(zip(map(float, mus), map(float, F))),
        monotone=mono, growth_ratio=ratio,
        verdict="consistent with +infinity" if (mono and ratio >= 2.0)
        else "not certified")


def _loglog_fit(scales, values, expected) -> RateFit:
    ls = np.log(np.asarray(scales, dtype=float))
    lv = np.log(np.abs(np.asarray(values, dtype=float)))
    slope, icpt = np.polyfit(ls, lv, 1)
    resid = lv - (slope * ls + icpt)
    r2 = 1.0 - float(np.sum(resid ** 2)) / float(np.sum((lv - lv.mean()) ** 2))
    fit = RateFit(samples=tuple(zip(map(float, scales), map(float, values))),
                  slope=float(slope), r2=r2, expected=expected)
    if r2 < 0.999:
        raise FitRejected(f"r^2 = {r2:.6f} < 0.999 for expected {expected}")
    return fit


def tail_rates(h: CompactWeight, params: ProblemParams,
               mu_window: Optional[tuple[int, int]] = None,
               xi_window: tuple[int, int] = (6, 12)) -> tuple[RateFit, RateFit]:
    """Fitted decay exponents: dilation to zero, center to infinity.

    The dilation window sits deep because the leading power carries slowly
    decaying corrections; defaults are 2^-14..2^-22 (supercritical) and
    2^-40..2^-48 (sublinear).
    """
    n = params.n
    if mu_window is None:
        mu_window = (14, 22) if params.supercritical_q else (40, 48)
    mus = 2.0 ** (-np.arange(mu_window[0], mu_window[1] + 1, dtype=float))
    xi0 = tuple(h.bumps[int(np.argmax([b.a for b in h.bumps]))].c)
    gv = [gamma(m, xi0, h, params, want_grad=False).gamma for m in mus]
    mu_expected = (n - params.gamma_s) if params.supercritical_q \
        else params.gamma_s
    mu_fit = _loglog_fit(mus, gv, mu_expected)

    xis = 2.0 ** np.arange(xi_window[0], xi_window[1] + 1, dtype=float)
    vals = []
    for d in xis:
        xi = np.zeros(n)
        xi[0] = d
        vals.append(gamma(1.0, xi, h, params, want_grad=False).gamma)
    xi_fit = _loglog_fit(xis, vals, -(n - 2.0 * params.s) * (params.q + 1.0))
    return mu_fit, xi_fit


# -- slab and critical points --------------------------------------------------

def _xi_samples(h: CompactWeight, params: ProblemParams, R: float,
                per_axis: int) -> np.ndarray:
    n = params.n
    axes = [np.linspace(-R, R, per_axis) for _ in range(n)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")],
                   axis=-1)
    return pts


def build_slab(h: CompactWeight, params: ProblemParams,
               max_refine: int = 3) -> SlabSpec:
    """Compact parameter slab with the boundary certified under half the
    interior threshold."""
    n = params.n
    xi0 = tuple(h.bumps[int(np.argmax([b.a for b in h.bumps]))].c)
    if params.supercritical_q:
        A = small_mu_limit(xi0, h, params).limit
        if A is None or A <= 0.0:
            raise SlabNotCertified("no positive small-scale limit at the seed")
    else:
        A = np.inf
    pw = n - params.gamma_s
    mu0 = None
    for j in range(2, 26):
        cand = 2.0 ** (-j)
        B_cand = cand ** pw / 2.0 * min(A, 1.0)
        if gamma(cand, xi0, h, params, want_grad=False).gamma >= B_cand:
            mu0 = cand
            B = B_cand
            break
    if mu0 is None:
        raise SlabNotCertified("no seed dilation reached the threshold")

    lo, hi = weight_support_box(h)
    R_box = float(np.max(np.abs(np.concatenate([lo, hi])))) + 1.0

    def mu_slice_max(mu, R, per_axis):
        pts = _xi_samples(h, params, R, per_axis)
        return max(gamma(mu, p, h, params, want_grad=False).gamma
                   for p in pts)

    per_axis = {1: 81, 2: 21, 3: 9}[n]
    mu1 = mu0 / 2.0
    for _ in range(30):
        if mu_slice_max(mu1, R_box, per_axis) < B / 2.0:
            break
        mu1 /= 2.0
    else:
        raise SlabNotCertified("inner dilation face not below threshold")

    mu2 = max(4.0 * mu0, R_box + 1.0)
    for _ in range(30):
        R = mu2
        top = mu_slice_max(mu2, R, per_axis)
        side = _side_max(h, params, mu1, mu2, R)
        if max(top, side) < B / 2.0:
            break
        mu2 *= 2.0
    else:
        raise SlabNotCertified("outer boundary not below threshold")

    # certify by refining the boundary sampling until stable
    margin = max(top, side)
    density = 2
    for _ in range(max_refine):
        top2 = mu_slice_max(mu2, R, per_axis * density)
        side2 = _side_max(h, params, mu1, mu2, R, density)
        margin = max(top2, side2)
        if margin >= B / 2.0:
            raise SlabNotCertified(
                f"refined boundary sample {margin} exceeded B/2 = {B / 2.0}")
        density *= 2
    return SlabSpec(mu1=mu1, mu2=mu2, R=R, B=B, mu0=mu0, xi0=xi0,
                    boundary_max=margin)


def _side_max(h, params, mu1, mu2, R, density: int = 1) -> float:
    n = params.n
    mus = np.geomspace(mu1, mu2, 24 * density)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, 32 * density, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        m = 64 * density
        idx = np.arange(m) + 0.5
        phi = np.arccos(1.0 - 2.0 * idx / m)
        th = np.pi * (1.0 + 5.0 ** 0.5) * idx
        dirs = np.stack([np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th),
                         np.cos(phi)], axis=-1)
    best = -np.inf
    for mu in mus:
        for d in dirs:
            best = max(best, gamma(mu, R * d, h, params,
                                   want_grad=False).gamma)
    return best


def find_critical_points(h: CompactWeight, params: ProblemParams,
                         slab: SlabSpec,
                         gamma_fn: Optional[Callable] = None,
                         kinds: tuple[str, ...] = ("max", "min"),
                         grad_tol: float = 1e-10,
                         max_iter: int = 500) -> list[CriticalPoint]:
    """Coarse scan over the slab followed by gradient ascent/descent.

    gamma_fn(mu, xi) -> GammaSample is injectable for testing; the default
    evaluates the reduced functional of (h, params).
    """
    n = params.n
    if gamma_fn is None:
        def gamma_fn(mu, xi):
            return gamma(mu, xi, h, params)

    mus = np.geomspace(slab.mu1, slab.mu2, 21)
    per_axis = {1: 31, 2: 15, 3: 7}[n]
    xis = _xi_samples(h, params, slab.R, per_axis)
    table = np.array([[gamma_fn(mu, xi).gamma for xi in xis] for mu in mus])

    found: list[CriticalPoint] = []
    for kind in kinds:
        sgn = 1.0 if kind == "max" else -1.0
        flat = sgn * table
        order = np.argsort(flat.ravel())[::-1]
        seeds = []
        for idx in order[:6]:
            i, j = np.unravel_index(idx, table.shape)
            if flat[i, j] <= 0.0 and kind == "max":
                continue
            if flat[i, j] <= 0.0 and kind == "min":
                continue
            seeds.append((float(mus[i]), tuple(map(float, xis[j]))))
        for mu_s, xi_s in seeds[:3]:
            pt = _ascend(gamma_fn, mu_s, xi_s, sgn, slab, grad_tol, max_iter)
            if pt is None:
                continue
            mu_r, xi_r, val, gn, boundary = pt
            dup = any(abs(c.mu - mu_r) + sum(abs(a - b) for a, b in
                                             zip(c.xi, xi_r)) < 1e-5
                      and c.kind == kind for c in found)
            if not dup:
                found.append(CriticalPoint(mu=mu_r, xi=xi_r, kind=kind,
                                           gamma=val, grad_norm=gn,
                                           on_boundary=boundary))
    interior = [c for c in found if not c.on_boundary]
    if not interior:
        raise NoInteriorCriticalPoint(
            "all refined candidates converged to the slab boundary")
    interior.sort(key=lambda c: (c.kind, c.mu, c.xi))
    return interior


def _ascend(gamma_fn, mu, xi, sgn, slab, grad_tol, max_iter):
    theta = np.array([mu, *xi], dtype=float)

    def clip(th):
        th = th.copy()
        th[0] = min(max(th[0], slab.mu1), slab.mu2)
        r = np.sqrt(np.sum(th[1:] ** 2))
        if r > slab.R:
            th[1:] *= slab.R / r
        return th

    samp = gamma_fn(theta[0], tuple(theta[1:]))
    val = sgn * samp.gamma
    grad = sgn * np.asarray(samp.grad)
    step = 0.25 * min(theta[0], 1.0)
    gn = float(np.sqrt(np.sum(grad ** 2)))
    for _ in range(max_iter):
        if gn <= grad_tol:
            break
        trial_step = step
        moved = False
        for _ in range(40):
            cand = clip(theta + trial_step * grad / max(gn, 1e-300))
            csamp = gamma_fn(cand[0], tuple(cand[1:]))
            cval = sgn * csamp.gamma
            if cval > val:
                theta, val = cand, cval
                grad = sgn * np.asarray(csamp.grad)
                gn = float(np.sqrt(np.sum(grad ** 2)))
                step = trial_step * 1.5
                moved = True
                break
            trial_step /= 2.0
        if not moved:
            # line search exhausted; polish with a few secant steps on grad
            theta, val, grad, gn = _polish(gamma_fn, theta, sgn)
            break
    boundary = bool(abs(theta[0] - slab.mu1) < 1e-9 * slab.mu1
                    or abs(theta[0] - slab.mu2) < 1e-9 * slab.mu2
                    or abs(np.sqrt(np.sum(theta[1:] ** 2)) - slab.R)
                    < 1e-9 * slab.R)
    return theta[0], tuple(theta[1:]), sgn * val, gn, boundary


def _polish(gamma_fn, theta, sgn, rounds: int = 8):
    """Newton steps on the gradient with a finite-difference Jacobian."""
    d = theta.size
    for _ in range(rounds):
        samp = gamma_fn(theta[0], tuple(theta[1:]))
        grad = np.asarray(samp.grad)
        gn = float(np.sqrt(np.sum(grad ** 2)))
        if gn <= 1e-12:
            break
        J = np.zeros((d, d))
        hstep = 1e-6 * max(theta[0], 1e-3)
        for i in range(d):
            tp = theta.copy()
            tp[i] += hstep
            tm = theta.copy()
            tm[i] -= hstep
            gp = np.asarray(gamma_fn(tp[0], tuple(tp[1:])).grad)
            gm = np.asarray(gamma_fn(tm[0], tuple(tm[1:])).grad)
            J[:, i] = (gp - gm) / (2.0 * hstep)
        try:
            delta = np.linalg.solve(J, -grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        theta = theta + delta
    samp = gamma_fn(theta[0], tuple(theta[1:]))
    grad = np.asarray(samp.grad)
    return theta, sgn * samp.gamma, sgn * grad, float(
        np.sqrt(np.sum(grad ** 2)))
