"""Weighted norms on slit domains and the inequality checkers."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import perp_weights
from .grid import FieldSample, Quadrature, SlitGrid
from .poly import LinearPoly, poly_basis

__all__ = [
    "Ball",
    "Box",
    "WeightedNorms",
    "InequalityRow",
    "quadrature_for",
    "weighted_norms",
    "check_poincare",
    "check_hardy",
    "campanato_deviation",
    "fit_linear_poly",
    "check_caccioppoli",
    "rows_to_csv",
]


@dataclass(frozen=True)
class Ball:
    radius: float
    center: tuple = ()

    def _c(self, d):
        c = np.zeros(d)
        c[: len(self.center)] = self.center
        return c

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.linalg.norm(p - self._c(p.shape[-1]), axis=-1) <= self.radius

    def bounds(self, d):
        c = self._c(d)
        return c - self.radius, c + self.radius

    def label(self) -> str:
        return f"B({self.radius:g})"


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all((p >= np.array(self.lower)) & (p <= np.array(self.upper)), axis=-1)

    def bounds(self, d):
        return np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)

    def label(self) -> str:
        return "box"


def _covers(grid: SlitGrid, region, tol: float = 1e-12) -> bool:
    if region is None or not hasattr(region, "bounds"):
        return True
    lo, hi = region.bounds(grid.dim)
    glo, ghi = np.array(grid.lower), np.array(grid.upper)
    t = slice(0, grid.dim - 2)
    if np.any(lo[t] < glo[t] - tol) or np.any(hi[t] > ghi[t] + tol):
        return False
    if grid.coords == "sqrt":
        # physical x^perp box must fit in the disc covered by the sqrt box
        rmax = min(ghi[-2], ghi[-1], -glo[-1]) ** 2
        if isinstance(region, Ball):
            corner = np.linalg.norm(region._c(grid.dim)[-2:]) + region.radius
        else:
            ext = np.maximum(np.abs(lo[-2:]), np.abs(hi[-2:]))
            corner = np.hypot(ext[0], ext[1])
        return bool(corner <= rmax + tol)
    if grid.half:
        lo = lo.copy()
        hi = hi.copy()
        top = max(abs(lo[-1]), abs(hi[-1]))
        lo[-1], hi[-1] = 0.0, top
    return bool(np.all(lo[-2:] >= glo[-2:] - tol) and np.all(hi[-2:] <= ghi[-2:] + tol))


@lru_cache(maxsize=8)
def quadrature_for(grid: SlitGrid) -> Quadrature:
    return Quadrature(grid)


@dataclass(frozen=True)
class WeightedNorms:
    energy: float
    wl2: float
    plain_l2: float
    plain_energy: float

    @property
    def norm(self) -> float:
        """Norm of the weighted space: ``sqrt(energy + wl2)``."""
        return float(np.sqrt(self.energy + self.wl2))


@dataclass(frozen=True)
class InequalityRow:
    check_name: str
    h: float
    region: str
    value: float
    bound: float
    passed: bool


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["check_name", "h", "region", "value", "bound", "pass"])
    for r in rows:
        wr.writerow([r.check_name, repr(float(r.h)), r.region, repr(float(r.value)),
                     repr(float(r.bound)), str(bool(r.passed)).lower()])
    return buf.getvalue()


def _field(w) -> FieldSample:
    if not isinstance(w, FieldSample):
        raise TypeError("expected a FieldSample")
    return w


def _prepare(w: FieldSample, region):
    if not _covers(w.grid, region):
        raise ValueError("region is not covered by the grid")
    q = quadrature_for(w.grid)
    return q, q.values(w.values), q.gradients(w.values)


def weighted_norms(w: FieldSample, region=None) -> WeightedNorms:
    """The four integrals ``int xi^2 |grad w|^2``, ``int w^2/rho``, ``int w^2``, ``int |grad w|^2``."""
    w = _field(w)
    q, (vm, ve), (gm, ge) = _prepare(w, region)
    g2m, g2e = (gm**2).sum(-1), (ge**2).sum(-1)
    return WeightedNorms(
        energy=q.integrate(g2m, g2e, "xi2", region),
        wl2=q.integrate(vm**2, ve**2, "inv_rho", region),
        plain_l2=q.integrate(vm**2, ve**2, None, region),
        plain_energy=q.integrate(g2m, g2e, None, region),
    )


def check_poincare(w: FieldSample, r: float = 1.0, center=()) -> float:
    """``int w^2/rho / int xi^2 |grad w|^2`` for ``w`` masked to ``B_r``."""
    w = _field(w)
    ball = Ball(r, tuple(center))
    masked = w.with_values(np.where(ball(w.grid.points), w.values, 0.0))
    norms = weighted_norms(masked, None)
    if norms.energy == 0.0:
        if norms.wl2 > 0.0:
            raise ValueError("zero weighted energy with nonzero weighted L2 norm")
        return 0.0
    return norms.wl2 / norms.energy


def check_hardy(u: FieldSample, region=None) -> float:
    """``int (u/xi)^2 / rho / int |grad u|^2``."""
    u = _field(u)
    q, (vm, ve), (gm, ge) = _prepare(u, region)
    xm = perp_weights(q.points)[1]
    xe = perp_weights(q.xpoints)[1] if len(ve) else np.zeros(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rm = np.where(xm > 0, vm / np.where(xm > 0, xm, 1.0), 0.0)
        re = np.where(xe > 0, ve / np.where(xe > 0, xe, 1.0), 0.0)
    num = q.integrate(rm**2, re**2, "inv_rho", region)
    den = q.integrate((gm**2).sum(-1), (ge**2).sum(-1), None, region)
    if den == 0.0:
        if num > 0.0:
            raise ValueError("zero energy with nonzero weighted quotient")
        return 0.0
    return num / den


def _min_radius_ok(grid: SlitGrid, r: float) -> bool:
    h = grid.spacing
    if grid.coords == "sqrt":
        # physical resolution near rho ~ r is about 2 sqrt(r) h
        return r >= 3 * 2 * np.sqrt(r) * h[-1] and r >= 3 * max(h[:-2], default=0)
    return r >= 3 * h.max()


def campanato_deviation(w: FieldSample, L: LinearPoly, center=(), r: float = 1.0,
                        alpha: float = 0.25) -> float:
    """``sigma = (r^{-(n+2+2 alpha)} int_{B_r(center)} |w - L|^2 / rho)^{1/2}``."""
    w = _field(w)
    n = w.grid.n
    if not _min_radius_ok(w.grid, r):
        raise ValueError("radius below three grid cells")
    ball = Ball(r, tuple(center))
    q, (vm, ve), _ = _prepare(w, ball)
    # compare interpolants: L is sampled at the nodes like w
    lm, le = q.values(L(w.grid.points))
    dm = vm - lm
    de = ve - le
    val = q.integrate(dm**2, de**2, "inv_rho", ball)
    return float(np.sqrt(max(val, 0.0) * r ** (-(n + 2 + 2 * alpha))))


def fit_linear_poly(w: FieldSample, r: float, center=(), kappa: float = 1.0) -> tuple[LinearPoly, float]:
    """Minimise ``int_{B_r(center)} |w - L|^2 / rho`` over ``L``.

    Returns the minimiser and the minimum value.  ``center`` is a tangential
    point; the basis is shifted to it.
    """
    w = _field(w)
    d = w.grid.dim
    ct = np.zeros(d - 2) if len(center) == 0 else np.asarray(center, dtype=float)
    ball = Ball(r, tuple(ct) + (0.0, 0.0))
    q, (vm, ve), _ = _prepare(w, ball)
    wm, we = q.weighted("inv_rho")
    mm, me = q.mask(ball)
    wts = np.concatenate([np.where(mm, wm, 0.0).ravel(), np.where(me, we, 0.0)])
    vals = np.concatenate([vm.ravel(), ve])
    keep = wts > 0
    # basis interpolated from nodal values, so nodal basis members are fitted exactly
    nodal = poly_basis(w.grid.points, ct, kappa)
    cols = [q.values(nodal[..., k]) for k in range(nodal.shape[-1])]
    B = np.stack([np.concatenate([m.ravel(), e]) for m, e in cols], axis=-1)[keep]
    sw = np.sqrt(wts[keep])
    M = B * sw[:, None]
    if np.linalg.cond(M) > 1e10:
        raise ValueError("ill-conditioned least-squares fit; ball too small")
    coef, *_ = np.linalg.lstsq(M, vals[keep] * sw, rcond=None)
    resid = float(np.sum(wts[keep] * (vals[keep] - B @ coef) ** 2))
    if w.grid.half:
        resid *= 2.0
    return LinearPoly.from_coef(coef, tuple(ct), kappa), resid


def check_caccioppoli(w: FieldSample, f=None, g=None, r: float = 1.0, center=()) -> tuple[float, float]:
    """``lhs = int_{B_{r/2}} xi^2 |grad w|^2``; ``rhs = int_{B_r} w^2/rho + xi^2|f|^2 + rho xi^4 g^2``.

    ``f`` maps points to vectors and ``g`` points to scalars; ``None`` means zero.
    """
    w = _field(w)
    inner = Ball(r / 2, tuple(center))
    outer = Ball(r, tuple(center))
    q, (vm, ve), (gm, ge) = _prepare(w, outer)
    lhs = q.integrate((gm**2).sum(-1), (ge**2).sum(-1), "xi2", inner)
    rhs = q.integrate(vm**2, ve**2, "inv_rho", outer)
    ex = len(ve) > 0
    if f is not None:
        fm = (np.asarray(f(q.points)) ** 2).sum(-1)
        fe = (np.asarray(f(q.xpoints)) ** 2).sum(-1) if ex else ve
        rhs += q.integrate(fm, fe, "xi2", outer)
    if g is not None:
        gm2 = np.asarray(g(q.points)) ** 2
        ge2 = np.asarray(g(q.xpoints)) ** 2 if ex else ve
        rhs += q.integrate(gm2, ge2, "rho_xi4", outer)
    return lhs, rhs
