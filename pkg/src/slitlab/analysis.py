"""Property-(F) checkers, ratio fields, Campanato and Hölder-average fits,
Hopf and boundary-Harnack experiments, and the free-boundary regularity pipeline."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .coefficients import CoeffField, pullback_coefficients
from .geometry import Cone, hom_eval, path_distance, perp_weights
from .grid import FieldSample, SlitGrid
from .poly import LinearPoly
from .wspace import Ball, fit_linear_poly, quadrature_for

__all__ = [
    "PropertyFReport",
    "CampanatoReport",
    "HolderReport",
    "HarnackReport",
    "HypothesisError",
    "kappa_at",
    "check_property_F",
    "property_f_corpus",
    "equivalence_suite",
    "ratio_field",
    "ratio_residual",
    "manufacture_phi",
    "campanato_fit",
    "decay_exponent",
    "harnack_experiment",
    "holder_average_fit",
    "hopf_check",
    "c2alpha_pipeline",
]

VARIANTS = ("F", "F1", "F2", "F3")


class HypothesisError(ValueError):
    """A hypothesis of an experiment failed; ``stage`` names where."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# --------------------------------------------------------------------------- property (F)
def kappa_at(A: CoeffField | None, xT) -> np.ndarray:
    """Anisotropy ``kappa(A(x^T, 0, 0))`` for tangential points ``xT`` of shape ``(..., n-1)``."""
    xT = np.asarray(xT, dtype=float)
    if A is None:
        return np.ones(xT.shape[:-1])
    p = np.concatenate([xT, np.zeros(xT.shape[:-1] + (2,))], axis=-1)
    M = A(p)
    return np.sqrt(M[..., -2, -2] / M[..., -1, -1])


def _slit_distance(p):
    return np.where(p[..., -2] < 0, np.abs(p[..., -1]), np.hypot(p[..., -2], p[..., -1]))


@dataclass
class PropertyFReport:
    variant: str
    region: float
    constant: float
    sup: float
    seminorm: float
    worst_pair: list
    passed: bool
    cap: float

    def as_dict(self) -> dict:
        return asdict(self)


def _perp_samples(rng, count, rmin, rmax, band):
    """Points of ``x^perp`` with ``rmin < |x^perp| <= rmax``, half of them crowding the slit."""
    s = np.sqrt(rng.uniform(rmin**2, rmax**2, count))
    th = rng.uniform(-np.pi, np.pi, count)
    near = rng.random(count) < 0.5
    tmin = np.clip(band / np.maximum(s, 1e-300), 1e-12, 1.0)
    t = np.exp(rng.uniform(np.log(tmin), 0.0))
    th = np.where(near, np.sign(rng.uniform(-1, 1, count)) * (np.pi - t), th)
    return np.stack([s * np.cos(th), s * np.sin(th)], -1)


def _sample_cone(rng, d, xT, r, count, band, annulus=False):
    perp = _perp_samples(rng, count, r / 2 if annulus else 0.0, r, band)
    s = np.linalg.norm(perp, axis=-1)
    k = d - 2
    if k:
        v = rng.normal(size=(count, k))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        tang = xT + v * (s * rng.random(count) ** (1.0 / k))[:, None]
        return np.concatenate([tang, perp], -1)
    return perp


def _sample_ball(rng, d, xT, r, count, band):
    pts = []
    while sum(len(p) for p in pts) < count:
        perp = _perp_samples(rng, count, 0.0, r, band)
        k = d - 2
        if k:
            tang = xT + rng.uniform(-r, r, size=(count, k))
            q = np.concatenate([tang, perp], -1)
        else:
            q = perp
        c = np.concatenate([xT, [0.0, 0.0]])
        pts.append(q[np.linalg.norm(q - c, axis=-1) <= r])
    return np.concatenate(pts)[:count]


def _h_values(f, A, p, frozen_xT=None):
    if frozen_xT is None:
        kap = kappa_at(A, p[..., :-2])
    else:
        kap = np.broadcast_to(kappa_at(A, np.asarray(frozen_xT, dtype=float)[None])[0], p.shape[:-1])
    ubar = hom_eval(kap, p)
    vals = np.asarray(f(p), dtype=float)
    keep = ubar > 1e-14
    h = np.full(vals.shape, np.nan)
    h[keep] = vals[keep] / ubar[keep]
    return h


def _holder(hy, hz, y, z, alpha):
    dist = path_distance(y, z)
    ok = np.isfinite(hy) & np.isfinite(hz) & (dist > 0)
    if not ok.any():
        return 0.0, []
    q = np.abs(hy[ok] - hz[ok]) / dist[ok] ** alpha
    i = int(np.argmax(q))
    return float(q[i]), [y[ok][i].tolist(), z[ok][i].tolist()]


def _jitter_pairs(rng, pts, r, band, member):
    scale = r * 10.0 ** rng.uniform(-3, -0.5, len(pts))
    z = pts + rng.normal(size=pts.shape) * scale[:, None]
    keep = member(z) & (_slit_distance(z) >= band)
    return pts[keep], z[keep]


def _set_constant(f, A, alpha, y_pts, z_pts, frozen, rng, r, band, member_z):
    hy = _h_values(f, A, y_pts, frozen)
    hz = _h_values(f, A, z_pts, frozen)
    sup = float(np.nanmax(np.abs(np.concatenate([hy, hz])))) if len(hy) else 0.0
    m = min(len(y_pts), len(z_pts))
    i = rng.integers(0, len(y_pts), 4 * m)
    j = rng.integers(0, len(z_pts), 4 * m)
    semi, worst = _holder(hy[i], hz[j], y_pts[i], z_pts[j], alpha)
    yj, zj = _jitter_pairs(rng, y_pts, r, band, member_z)
    if len(yj):
        s2, w2 = _holder(_h_values(f, A, yj, frozen), _h_values(f, A, zj, frozen), yj, zj, alpha)
        if s2 > semi:
            semi, worst = s2, w2
    return sup, semi, worst


def check_property_F(f: Callable, A: CoeffField | None = None, variant: str = "F", radius: float = 1.0,
                     alpha: float = 0.25, cap: float = 50.0, samples: int = 600, cones: int = 6,
                     band: float = 1e-3, seed: int = 0) -> PropertyFReport:
    """Empirical ``C^alpha`` constant of ``f / ubar`` for one of the variants on ``B_radius``.

    ``band`` is relative to the set radius: sample points closer than
    ``band * r`` to the slit are excluded.  The constant is the sampled sup
    of ``|h|`` plus the sampled Hölder quotient with respect to the path
    distance.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    d = A.dim if A is not None else _probe_dim(f)
    rng = np.random.default_rng(seed)
    R = float(radius)
    zeroT = np.zeros(d - 2)
    best = (0.0, 0.0, 0.0, [])
    if variant == "F":
        bd = band * R
        pts = _sample_ball(rng, d, zeroT, R, 2 * samples, bd)
        pts = pts[_slit_distance(pts) >= bd]
        ball = Ball(R)
        sup, semi, worst = _set_constant(f, A, alpha, pts, pts, None, rng, R, bd, ball)
        best = (sup + semi, sup, semi, worst)
    else:
        for c in range(cones):
            if d > 2 and c > 0:
                xT = rng.uniform(-1, 1, d - 2)
                xT *= rng.uniform(0, R / 4) / max(np.linalg.norm(xT), 1e-300)
            else:
                xT = zeroT.copy()
            if variant == "F3":
                r = rng.uniform(0.25, 0.375) * R if c else 0.375 * R
                r = min(r, (R - np.linalg.norm(xT)) / 2)
            else:
                r = rng.uniform(0.25, 0.4) * R if c else 0.4 * R
            bd = band * r
            cone = Cone(xT, r)
            ann = variant == "F1"
            zp = _sample_cone(rng, d, xT, r, samples, bd, annulus=ann)
            zp = zp[_slit_distance(zp) >= bd]

            def in_cone(p, cone=cone, r=r, ann=ann):
                m = cone.contains(p)
                return m & (np.hypot(p[..., -2], p[..., -1]) > r / 2) if ann else m

            if variant == "F3":
                yp = _sample_ball(rng, d, xT, r, samples, bd)
                yp = yp[_slit_distance(yp) >= bd]
                sup, semi, worst = _set_constant(f, A, alpha, yp, zp, xT, rng, r, bd, in_cone)
                sup = float(np.nanmax(np.abs(_h_values(f, A, yp, xT))))
            else:
                sup, semi, worst = _set_constant(f, A, alpha, zp, zp, xT, rng, r, bd, in_cone)
            if sup + semi > best[0]:
                best = (sup + semi, sup, semi, worst)
    const, sup, semi, worst = best
    return PropertyFReport(variant, R, float(const), float(sup), float(semi), worst,
                           bool(np.isfinite(const) and const <= cap), cap)


def _probe_dim(f) -> int:
    for d in (2, 3):
        try:
            np.asarray(f(np.full((1, d), 0.1)))
            return d
        except Exception:  # noqa: BLE001 - probing the field's dimension
            continue
    raise ValueError("cannot infer the dimension of f; pass A")


def property_f_corpus(A: CoeffField | None = None, n: int = 2, count: int = 20, seed: int = 0):
    """Synthetic fields ``ubar_{A(x^T)} * h`` with ``h`` Hölder in the path distance."""
    rng = np.random.default_rng(seed)
    shapes = [
        lambda p, a: 1.0 + 0 * p[..., 0],
        lambda p, a: 1.0 + a[0] * p[..., 0],
        lambda p, a: 2.0 + a[0] * p[..., -2] + a[1] * p[..., 0] ** 2,
        lambda p, a: np.cos(a[0] * p[..., 0]) + 0.3 * p[..., -2],
        lambda p, a: 1.5 + a[0] * perp_weights(p)[2],
        lambda p, a: 2.0 + a[0] * perp_weights(p)[0] ** 0.5,
        lambda p, a: np.exp(-a[1] * np.sum(p**2, -1)),
        lambda p, a: 1.0 + a[0] * np.sin(2 * p[..., -2]) + a[1] * p[..., -1] ** 2,
        lambda p, a: 1.0 + a[0] * perp_weights(p)[1] * p[..., 0],
        lambda p, a: 3.0 + a[0] * np.abs(p[..., 0]) ** 0.5,
    ]
    out = []
    for k in range(count):
        shape = shapes[k % len(shapes)]
        a = rng.uniform(-1, 1, 2)

        def f(p, shape=shape, a=a):
            p = np.asarray(p, dtype=float)
            return hom_eval(kappa_at(A, p[..., :-2]), p) * shape(p, a)

        out.append((f"corpus_{k:02d}", f))
    return out


def equivalence_suite(fields, A: CoeffField | None = None, radius: float = 1.0, shrink: float = 100.0,
                      alpha: float = 0.25, cap: float = 50.0, samples: int = 400, seed: int = 0) -> dict:
    """Constants of all variants at ``radius`` and ``radius / shrink`` and the implication lattice."""
    implications = [("F3", "F"), ("F3", "F1"), ("F3", "F2"), ("F2", "F1"), ("F", "F1"), ("F2", "F3")]
    rows = []
    ok = True
    inflation = []
    for name, f in fields:
        big = {v: check_property_F(f, A, v, radius, alpha, cap, samples, seed=seed) for v in VARIANTS}
        small = {v: check_property_F(f, A, v, radius / shrink, alpha, cap, samples, seed=seed)
                 for v in VARIANTS}
        checks = []
        for pre, post in implications:
            if big[pre].passed:
                holds = small[post].passed
                ok &= holds
                ratio = small[post].constant / max(big[pre].constant, 1e-300)
                inflation.append(ratio)
                checks.append({"premise": pre, "conclusion": post, "holds": bool(holds),
                               "inflation": float(ratio)})
        rows.append({"field": name,
                     "constants": {v: big[v].constant for v in VARIANTS},
                     "constants_shrunk": {v: small[v].constant for v in VARIANTS},
                     "passed": {v: big[v].passed for v in VARIANTS},
                     "passed_shrunk": {v: small[v].passed for v in VARIANTS},
                     "implications": checks})
    return {"fields": rows, "lattice_holds": bool(ok),
            "max_inflation": float(max(inflation)) if inflation else 0.0}


# --------------------------------------------------------------------------- ratios
def _band_mask(grid: SlitGrid, band: float | None = None) -> np.ndarray:
    """Nodes within one cell of the slit."""
    if grid.coords == "sqrt":
        b = grid.spacing[-2] if band is None else band
        return grid.nodes[..., -2] < 0.5 * b
    b = grid.spacing.max() if band is None else band
    return _slit_distance(grid.points) < b


def ratio_field(u1: FieldSample, u2: FieldSample, floor: float = 0.0, band: float | None = None,
                physical_band: float = 0.0) -> FieldSample:
    """``w = u1 / u2`` with the near-slit band filled by extrapolation.

    On square-root grids band nodes are extrapolated along ``xi`` by the
    quadratic through the first three off-band nodes of their column; on physical grids
    band values are taken from the nearest off-band node along ``x_{n+1}``.
    ``physical_band`` widens the band to every node closer than that to the
    slit.
    """
    if u1.grid != u2.grid:
        raise ValueError("fields live on different grids")
    grid = u2.grid
    xi = grid.xi
    bandm = _band_mask(grid, band)
    if physical_band > 0:
        bandm = bandm | (_slit_distance(grid.points) < physical_band)
    off = ~bandm
    if floor > 0 and np.any(u2.values[off] < floor * xi[off]):
        raise HypothesisError("ratio", f"u2 / xi drops below the floor {floor}")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(off, u1.values / np.where(off, u2.values, 1.0), np.nan)
    if grid.coords == "sqrt":
        w = _fill_sqrt(w, bandm, grid.dim - 2)
    else:
        w = _fill_physical(w)
    if not np.all(np.isfinite(w)):
        raise HypothesisError("ratio", "u2 vanishes away from the slit")
    return FieldSample(grid, w, meta={"band_nodes": int(bandm.sum())})


def _fill_sqrt(w, bandm, ax):
    cols = np.moveaxis(w, ax, -1).reshape(-1, w.shape[ax]).copy()
    masks = np.moveaxis(bandm, ax, -1).reshape(-1, w.shape[ax])
    for col, m in zip(cols, masks):
        if not m.any():
            continue
        good = np.flatnonzero(~m)
        if len(good) < 2:
            col[:] = np.nan
            continue
        k = good[0]
        t = good[:3].astype(float)
        # quadratic extrapolation in the node index is exact for w ~ a + b xi^2
        coef = np.polyfit(t - k, col[good[:3]], len(t) - 1)
        col[:k] = np.polyval(coef, np.arange(k) - k)
        col[k:][m[k:]] = np.nan
    shape = list(np.moveaxis(w, ax, -1).shape)
    return np.moveaxis(cols.reshape(shape), -1, ax)


def _fill_physical(w):
    out = w.copy()
    bad = ~np.isfinite(out)
    ny = out.shape[-1]
    for j in range(ny):
        col = bad[..., j]
        if not col.any():
            continue
        for step in range(1, ny):
            for jj in (j + step, j - step):
                if 0 <= jj < ny:
                    src = out[..., jj]
                    fill = col & np.isfinite(src) & ~bad[..., jj]
                    out[..., j] = np.where(fill, src, out[..., j])
                    col = col & ~fill
            if not col.any():
                break
    return out


def _fd_grad(fn, p, s):
    d = p.shape[-1]
    out = np.zeros(p.shape)
    for k in range(d):
        e = np.zeros(d)
        e[k] = s
        out[..., k] = (np.asarray(fn(p + e)) - np.asarray(fn(p - e))) / (2 * s)
    return out


def _fd_div(vec, p, s):
    d = p.shape[-1]
    out = np.zeros(p.shape[:-1])
    for k in range(d):
        e = np.zeros(d)
        e[k] = s
        out += (np.asarray(vec(p + e))[..., k] - np.asarray(vec(p - e))[..., k]) / (2 * s)
    return out


def manufacture_phi(u: Callable, A, f: Callable | None, step: float = 1e-3) -> Callable:
    """``phi = div(A grad u) - div(f)`` by finite differences, so ``u`` solves the equation."""
    def phi(p):
        p = np.asarray(p, dtype=float)
        flux = lambda q: np.einsum("...ij,...j->...i", A(q), _fd_grad(u, q, step))
        out = _fd_div(flux, p, step)
        if f is not None:
            out = out - _fd_div(f, p, step)
        return out

    return phi


def ratio_residual(u1, u2, A, f1, f2, phi1, phi2, points, step: float = 1e-3) -> np.ndarray:
    """Finite-difference residual of the ratio identity at ``points``.

    ``div(u2^2 A grad w) - div(u2 f1 - u1 f2) - (f2 . grad u1 - f1 . grad u2) - (u2 phi1 - u1 phi2)``
    with ``w = u1 / u2``; all inputs are callables on physical points.
    """
    p = np.asarray(points, dtype=float)
    zero_v = lambda q: np.zeros(np.shape(q))
    zero_s = lambda q: np.zeros(np.shape(q)[:-1])
    f1 = f1 or zero_v
    f2 = f2 or zero_v
    phi1 = phi1 or zero_s
    phi2 = phi2 or zero_s
    w = lambda q: np.asarray(u1(q)) / np.asarray(u2(q))
    lhs_flux = lambda q: (np.asarray(u2(q)) ** 2)[..., None] * np.einsum("...ij,...j->...i", A(q), _fd_grad(w, q, step))
    lhs = _fd_div(lhs_flux, p, step)
    div_term = _fd_div(lambda q: np.asarray(u2(q))[..., None] * f1(q) - np.asarray(u1(q))[..., None] * f2(q), p, step)
    cross = np.sum(f2(p) * _fd_grad(u1, p, step) - f1(p) * _fd_grad(u2, p, step), -1)
    src = np.asarray(u2(p)) * phi1(p) - np.asarray(u1(p)) * phi2(p)
    return lhs - div_term - cross - src


# --------------------------------------------------------------------------- Campanato fits
@dataclass
class CampanatoReport:
    center: list
    radii: list
    sigma: list
    L: LinearPoly
    exponent: float
    alpha: float
    passed: bool
    fits: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"center": list(self.center), "radii": list(self.radii), "sigma": list(self.sigma),
                "L": self.L.as_dict(), "exponent": self.exponent, "alpha": self.alpha,
                "pass": self.passed}


def decay_exponent(radii, values) -> float:
    """Least-squares slope of ``log values`` against ``log radii``."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(r) < 3:
        raise ValueError("exponent fits need at least three radii")
    floor = 1e-13 * max(v.max(), 1e-300)
    if v.max() <= 1e-13:
        return float("inf")
    return float(np.polyfit(np.log(r), np.log(np.maximum(v, floor)), 1)[0])


def campanato_fit(w: FieldSample, center=(), radii=(0.4, 0.2, 0.1, 0.05), alpha: float = 0.25,
                  kappa: float = 1.0, tol: float = 0.05) -> CampanatoReport:
    """Per-radius weighted fits of ``w`` by linear "polynomials".

    ``sigma(r)^2 = r^{-(n+2+2 alpha)} min_L int_{B_r} |w - L|^2 / rho``.  The
    decay exponent is ``alpha`` plus the slope of ``log sigma``; it estimates
    the ``C^{1, exponent}`` order of ``w`` at the centre.  The reported ``L``
    is the fit on the smallest radius.
    """
    n = w.grid.n
    radii = sorted((float(r) for r in radii), reverse=True)
    sig, fits = [], []
    for r in radii:
        L, m = fit_linear_poly(w, r, center, kappa)
        sig.append(float(np.sqrt(max(m, 0.0) * r ** (-(n + 2 + 2 * alpha)))))
        fits.append(L)
    expo = alpha + decay_exponent(radii, sig)
    expo = min(expo, 2.0)
    return CampanatoReport(list(center), radii, sig, fits[-1], float(expo), alpha,
                           bool(expo >= alpha - tol), fits)


# --------------------------------------------------------------------------- Hölder average / Hopf
@dataclass
class HolderReport:
    center: list
    cbar: float
    radii: list
    deviations: list
    exponent: float
    alpha: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _quotient(u: FieldSample) -> FieldSample:
    return ratio_field(u, u.with_values(u.grid.xi))


def holder_average_fit(u: FieldSample, center=(), radii=(0.4, 0.2, 0.1, 0.05), alpha: float = 0.25,
                       tol: float = 0.05) -> HolderReport:
    """``cbar`` = weighted ``1/rho`` mean of ``u/xi`` on the smallest ball; deviations over radii."""
    v = _quotient(u)
    n = u.grid.n
    q = quadrature_for(u.grid)
    vm, ve = q.values(v.values)
    c = tuple(center) + (0.0, 0.0) if len(center) else ()
    radii = sorted((float(r) for r in radii), reverse=True)
    small = Ball(radii[-1], c)
    one_m, one_e = np.ones_like(vm), np.ones_like(ve)
    cbar = q.integrate(vm, ve, "inv_rho", small) / q.integrate(one_m, one_e, "inv_rho", small)
    devs, plain = [], []
    for r in radii:
        ball = Ball(r, c)
        val = q.integrate((vm - cbar) ** 2, (ve - cbar) ** 2, "inv_rho", ball)
        devs.append(float(val * r ** (-(n + 2 * alpha))))
        plain.append(float(np.sqrt(max(val, 0.0) * r ** (-n))))
    expo = min(decay_exponent(radii, plain), 2.0)
    return HolderReport(list(center), float(cbar), radii, devs, float(expo), alpha,
                        bool(expo >= alpha - tol))


def hopf_check(u: FieldSample, radius: float = 0.125, center=(), band: float | None = None,
               physical_band: float = 0.0) -> float:
    """Minimum of ``u / xi`` over nodes of ``B_radius`` outside the near-slit band.

    ``physical_band`` additionally drops nodes closer than that distance to
    the slit, for fields resampled from a coarser physical grid.
    """
    grid = u.grid
    c = tuple(center) + (0.0, 0.0) if len(center) else ()
    m = Ball(radius, c)(grid.points) & ~_band_mask(grid, band)
    if physical_band > 0:
        m &= _slit_distance(grid.points) >= physical_band
    if not m.any():
        raise ValueError("no nodes in the ball outside the slit band")
    return float(np.min(u.values[m] / grid.xi[m]))


# --------------------------------------------------------------------------- boundary Harnack
@dataclass
class HarnackReport:
    reports: list
    centers: list
    values: list
    slopes: list
    taylor_exponent: float
    derivative_exponent: float
    hypotheses: dict

    def as_dict(self) -> dict:
        return {"centers": self.centers, "values": self.values, "slopes": self.slopes,
                "taylor_exponent": self.taylor_exponent,
                "derivative_exponent": self.derivative_exponent,
                "hypotheses": self.hypotheses,
                "campanato": [r.as_dict() for r in self.reports]}


def _increment_exponent(t, vals, slopes=None, floor=1e-10):
    """Slope of ``log max |increment|`` against ``log separation``.

    With ``slopes`` given, increments are first-order Taylor remainders.
    Returns 2.0 when every increment is below ``floor`` (smooth to resolution).
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(vals, dtype=float)
    seps, incs = [], []
    for i in range(len(t)):
        for j in range(len(t)):
            if i == j:
                continue
            s = np.linalg.norm(np.atleast_1d(t[j] - t[i]))
            inc = v[j] - v[i]
            if slopes is not None:
                inc -= np.dot(np.atleast_1d(slopes[i]), np.atleast_1d(t[j] - t[i]))
            seps.append(s)
            incs.append(abs(inc))
    seps, incs = np.array(seps), np.array(incs)
    if incs.max() <= floor:
        return 2.0
    us = np.unique(np.round(seps, 12))
    if len(us) < 2:
        raise ValueError("need at least two distinct separations")
    worst = np.array([incs[np.isclose(seps, s)].max() for s in us])
    worst = np.maximum(worst, floor)
    return float(min(np.polyfit(np.log(us), np.log(worst), 1)[0], 2.0))


def harnack_experiment(u1: FieldSample, u2: FieldSample, centers=((),), A: CoeffField | None = None,
                       radii=(0.4, 0.2, 0.1), alpha: float = 0.25, floor: float = 0.1,
                       f_checks=None, physical_band: float = 0.0) -> HarnackReport:
    """Campanato fits of ``w = u1/u2`` at tangential centres and a tangential ``C^{1,alpha}`` fit.

    ``f_checks`` optionally lists callables that must have property (F).
    """
    hyp = {"hopf_floor": floor}
    mins = hopf_check(u2, radius=max(radii)) if floor > 0 else None
    hyp["min_u2_over_xi"] = mins
    if floor > 0 and mins < floor:
        raise HypothesisError("harnack", f"u2/xi = {mins:.3g} below the floor {floor}")
    if f_checks:
        res = [check_property_F(f, A, "F", 0.5, alpha) for f in f_checks]
        hyp["property_F"] = [r.constant for r in res]
        if not all(r.passed for r in res):
            raise HypothesisError("harnack", "a drift term fails property (F)")
    w = ratio_field(u1, u2, floor=0.0, physical_band=physical_band)
    reports, vals, slopes, cents = [], [], [], []
    for c in centers:
        c = tuple(float(x) for x in np.atleast_1d(c)) if len(np.atleast_1d(c)) else ()
        kap = float(kappa_at(A, np.array([c]))[0]) if (A is not None and len(c)) else \
            (float(kappa_at(A, np.zeros((1, 0)))[0]) if A is not None else 1.0)
        rep = campanato_fit(w, c, radii, alpha, kap)
        reports.append(rep)
        cents.append(list(c))
        vals.append(rep.L.c0)
        slopes.append(list(rep.L.c[:-1]))
    if len(centers) >= 3 and len(cents[0]):
        t = np.array(cents)
        taylor = _increment_exponent(t, vals, np.array(slopes))
        deriv = min(_increment_exponent(t, np.array(slopes)[:, k]) for k in range(t.shape[1]))
    else:
        taylor = deriv = float("nan")
    return HarnackReport(reports, cents, vals, slopes, taylor, deriv, hyp)


# --------------------------------------------------------------------------- pipeline
def _stage(report, name, passed, **info):
    report["stages"].append({"stage": name, "pass": bool(passed), **info})
    return passed


def c2alpha_pipeline(problem, h: float = 1 / 64, alpha: float = 0.25, domain: float = 0.5,
                     sqrt_h: float = 1 / 64, box: float = 0.35, centers=None,
                     radii=(0.2, 0.15, 0.1, 0.075), hopf_threshold: float = 0.5, tau: float = 0.05,
                     gamma_degree: int = 4) -> dict:
    """Signorini solve -> free boundary -> straightening -> derivative ratios -> Hölder fits.

    The Signorini problem is solved on ``[-domain, domain]^n x [0, domain]``;
    the derivative fields are resampled in straightened coordinates on a
    square-root grid of tangential half-width and radius ``box``.  Returns a
    JSON-ready dict with keys ``stage``, ``inputs``, ``constants``,
    ``exponents``, ``pass`` and per-stage diagnostics under ``stages``.
    """
    from .signorini import classify_regular, derivative_fields, frequency_profile, solve_signorini

    n = problem.n
    if n != 2:
        raise ValueError("the pipeline runs with n = 2")
    report = {"stage": "pipeline",
              "inputs": {"h": h, "alpha": alpha, "domain": domain, "sqrt_h": sqrt_h, "box": box,
                         "problem_id": problem.problem_id, "eps0": problem.A.eps0},
              "constants": {}, "exponents": {}, "pass": False, "stages": []}

    def abort(stage):
        report["aborted_at"] = stage
        report["stage"] = stage
        return report

    cells = int(round(domain / h))
    grid = SlitGrid(n, (-domain, -domain, 0.0), (domain, domain, domain), (2 * cells, 2 * cells, cells),
                    half=True)
    sol = solve_signorini(problem, grid)
    rep = sol.report()
    if not _stage(report, "solve", all(b["pass"] for b in rep["bounds_checked"]),
                  iterations=sol.iterations, complementarity=sol.complementarity, energy=sol.energy):
        return abort("solve")

    _, gam, flags = sol.Gamma
    x1 = grid.axes[0]
    ok = np.isfinite(gam) & ~flags & (np.abs(x1) <= 0.8 * domain)
    if ok.sum() < gamma_degree + 2:
        _stage(report, "free_boundary", False, reason="too few graph samples")
        return abort("free_boundary")
    coef = np.polyfit(x1[ok], gam[ok], gamma_degree)
    fit_err = float(np.max(np.abs(np.polyval(coef, x1[ok]) - gam[ok])))
    gamma = lambda yT, c=coef: np.polyval(c, np.asarray(yT)[..., 0])
    g0 = float(gamma(np.zeros((1,))))
    fb_ok = fit_err <= 2 * h
    _stage(report, "free_boundary", fb_ok, flagged_lines=int(flags.sum()), fit_error=fit_err,
           gamma0=g0, coefficients=coef.tolist())
    if not fb_ok:
        return abort("free_boundary")

    x0 = np.array([0.0, g0, 0.0])
    prof = frequency_profile(sol.U, x0, radii=tuple(domain * np.array([0.2, 0.3, 0.4, 0.5, 0.6])))
    cls = classify_regular(prof, tau=tau)
    report["constants"]["N0"] = cls["N0"]
    if not _stage(report, "classify", cls["regular"], N=prof.N.tolist(), **cls):
        return abort("classify")

    pb = pullback_coefficients(problem.A, gamma, problem.F, step=h / 4)
    probe = np.random.default_rng(1).uniform(-box, box, size=(500, 3))
    struct = pb.A.check_structure(probe)
    if not _stage(report, "pullback", all(struct.values()), **struct):
        return abort("pullback")

    derivs = [derivative_fields(sol, m) for m in range(n)]
    s = np.sqrt(box)
    xgrid = SlitGrid(n, (-box, 0.0, -s), (box, s, s),
                     (int(round(2 * box / sqrt_h)), int(round(s / sqrt_h)), int(round(2 * s / sqrt_h))),
                     coords="sqrt")
    ypts = pb.to_y(xgrid.points)
    fields = [FieldSample(xgrid, dv(ypts)) for dv in derivs]
    _stage(report, "derivatives", True, grid=list(xgrid.node_shape))

    un = fields[n - 1]
    hol = holder_average_fit(un, (0.0,), radii=(0.3, 0.2, 0.15), alpha=alpha)
    scale = hol.cbar
    if not scale > 0:
        _stage(report, "hopf_check", False, cbar=scale)
        return abort("hopf_check")
    un_scaled = un.with_values(un.values / scale)
    hmin = hopf_check(un_scaled, 0.125, (0.0,), physical_band=2 * h)
    report["constants"]["hopf_min"] = hmin
    report["constants"]["cbar"] = scale
    if not _stage(report, "hopf_check", hmin >= hopf_threshold, min_ratio=hmin, cbar=scale):
        return abort("hopf_check")

    if centers is None:
        centers = [(c,) for c in np.linspace(-0.1, 0.1, 9)]
    har = harnack_experiment(fields[0], un, centers, pb.A, radii, alpha, floor=0.0,
                             physical_band=2 * h)
    t = np.array([c[0] for c in har.centers])
    dgamma = -np.array(har.values)
    expo = _increment_exponent(t, dgamma)
    ref = np.polyval(np.polyder(coef), t)
    report["exponents"] = {"dgamma_holder": expo, "taylor": har.taylor_exponent,
                           "campanato": [r.exponent for r in har.reports]}
    report["constants"]["dgamma"] = dgamma.tolist()
    report["constants"]["dgamma_graph"] = ref.tolist()
    report["constants"]["dgamma_max_gap"] = float(np.max(np.abs(dgamma - ref)))
    finite = bool(np.all(np.isfinite(har.values)) and np.all(np.isfinite(har.slopes))
                  and all(np.isfinite(r.exponent) for r in har.reports))
    _stage(report, "harnack", finite, values=har.values, slopes=har.slopes,
           decay_pass=[bool(r.passed) for r in har.reports])
    _stage(report, "exponent", expo >= alpha, value=expo, target=alpha)
    report["pass"] = bool(all(st["pass"] for st in report["stages"]))
    report["stage"] = "complete"
    return report
