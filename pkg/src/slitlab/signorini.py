"""Thin obstacle (Signorini) solver on physical half grids and frequency analysis.

The energy is ``J(U) = int (1/2) grad U . A grad U + F U`` over the box, with
``U >= 0`` on the thin plane ``{x_{n+1} = 0}``.  Even symmetry is used: only
``x_{n+1} >= 0`` is stored and the thin plane carries the complementarity
conditions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .coefficients import CoeffField
from .dsolve import pcg
from .fem import load_vector, stiffness
from .grid import FieldSample, Quadrature, SlitGrid

__all__ = [
    "SignoriniProblem",
    "SignoriniSolution",
    "FrequencyProfile",
    "solve_signorini",
    "free_boundary_graph",
    "frequency",
    "frequency_profile",
    "blow_up",
    "classify_regular",
    "derivative_fields",
]


@dataclass
class SignoriniProblem:
    n: int
    A: CoeffField
    boundary: Callable
    F: Callable | None = None
    problem_id: str = "signorini"

    def __post_init__(self):
        if self.A.n != self.n:
            raise ValueError("coefficient dimension does not match n")


@dataclass
class SignoriniSolution:
    U: FieldSample
    contact: np.ndarray
    energy: float
    iterations: int
    complementarity: float
    residual: float
    problem_id: str = "signorini"
    flags: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    Gamma: tuple | None = None

    def report(self) -> dict:
        return {"problem_id": self.problem_id, "h": float(self.U.grid.spacing[0]),
                "iterations": self.iterations, "residual": self.residual, "energy": self.energy,
                "bounds_checked": [
                    {"name": "complementarity", "value": self.complementarity,
                     "pass": bool(self.complementarity <= 1e-8)},
                    {"name": "energy_monotone", "pass": _monotone(self.energy_history)},
                ]}


def _monotone(hist, tol: float = 1e-12) -> bool:
    h = np.asarray(hist)
    return bool(len(h) < 2 or np.all(np.diff(h) <= tol * (1 + np.abs(h[:-1]))))


@numba.njit(cache=True)
def _psor_sweep(indptr, indices, data, diag, b, u, free, thin, omega):
    change = 0.0
    for i in range(u.size):
        if not free[i]:
            continue
        s = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                s -= data[k] * u[j]
        new = (1.0 - omega) * u[i] + omega * s / diag[i]
        if thin[i] and new < 0.0:
            new = 0.0
        d = abs(new - u[i])
        if d > change:
            change = d
        u[i] = new
    return change


def _energy(K, b, u):
    return float(0.5 * u @ (K @ u) - b @ u)


def _masks(grid: SlitGrid):
    thin = np.zeros(grid.node_shape, dtype=bool)
    thin[..., 0] = True
    fixed = grid.boundary_mask.copy()
    # the thin plane is not a Dirichlet face, apart from its outer edges
    inner = np.ones(grid.node_shape, dtype=bool)
    for k in range(grid.dim - 1):
        sl = [slice(None)] * grid.dim
        sl[k] = 0
        inner[tuple(sl)] = False
        sl[k] = -1
        inner[tuple(sl)] = False
    inner[..., -1] = False
    fixed[inner & thin] = False
    return fixed, thin


def _active_set(K, b, u, free, thin, direct=True, max_iter=100):
    """Primal-dual active set iteration; returns the number of linear solves."""
    cand = free & thin
    diag = K.diagonal()
    active = cand & (u <= 0)
    for it in range(1, max_iter + 1):
        solve = free & ~active
        Kss = K[solve][:, solve]
        rhs = b[solve] - K[solve][:, ~solve] @ u[~solve]
        if direct:
            u[solve] = splu(Kss.tocsc()).solve(rhs)
        else:
            u[solve] = pcg(Kss.tocsr(), rhs, x0=u[solve], rtol=1e-12)[0]
        u[active] = 0.0
        lam = (K @ u - b) / diag
        new = cand & (lam - u > 0)
        if np.array_equal(new, active):
            return it
        active = new
    return max_iter


def solve_signorini(problem: SignoriniProblem, grid: SlitGrid, method: str = "active-set",
                    omega: float = 1.5, tol: float = 1e-12, comp_tol: float = 1e-8,
                    max_sweeps: int = 200000) -> SignoriniSolution:
    """Minimise the Signorini energy on a half grid.

    ``method='psor'`` runs projected SOR from the boundary extension;
    ``method='active-set'`` first solves with a primal-dual active set method
    and then polishes with projected SOR sweeps, which certify the result.
    """
    if grid.coords != "physical" or not grid.half or grid.centering != "vertex":
        raise ValueError("solve_signorini needs a physical vertex half grid")
    if grid.n != problem.n:
        raise ValueError("grid dimension does not match the problem")
    if not 0 < omega < 2:
        raise ValueError("omega must lie in (0, 2)")
    quad = Quadrature(grid, refine_tip=False)
    K = stiffness(grid, problem.A, None, quad).tocsr()
    b = load_vector(grid, None, problem.F, None, quad)
    fixed, thin = _masks(grid)
    free = ~fixed
    u = np.asarray(problem.boundary(grid.points), dtype=float).copy()
    flags = []
    edge = fixed & thin
    if np.any(u[edge] < 0):
        flags.append("negative boundary data on the thin plane")
    u[free] = 0.0
    uf, ff, tf = u.ravel(), free.ravel(), thin.ravel()
    solves = 0
    if method == "active-set":
        solves = _active_set(K, b, uf, ff, tf, direct=grid.dim == 2)
    elif method != "psor":
        raise ValueError("method must be 'active-set' or 'psor'")
    diag = K.diagonal().copy()
    hist = [_energy(K, b, uf)]
    sweeps = 0
    while True:
        _psor_sweep(K.indptr, K.indices, K.data, diag, b, uf, ff, tf, omega)
        sweeps += 1
        hist.append(_energy(K, b, uf))
        lam = (K @ uf - b) / diag
        comp = float(np.max(np.abs(np.minimum(uf, lam)[ff & tf]), initial=0.0))
        res = float(np.max(np.abs(lam[ff & ~tf]), initial=0.0))
        if abs(hist[-2] - hist[-1]) < tol * max(1.0, abs(hist[-1])) and comp < comp_tol and res < comp_tol:
            break
        if sweeps >= max_sweeps:
            raise RuntimeError(f"projected SOR did not converge in {sweeps} sweeps "
                               f"(complementarity {comp:.3g}, residual {res:.3g})")
    U = FieldSample(grid, uf.reshape(grid.node_shape), "even")
    contact = (uf.reshape(grid.node_shape)[..., 0] <= 0.0)
    # the stored half carries half the energy of the even solution
    sol = SignoriniSolution(U, contact, 2.0 * hist[-1], solves + sweeps, comp, res,
                            problem.problem_id, flags, hist)
    sol.Gamma = free_boundary_graph(sol)
    return sol


def free_boundary_graph(sol: SignoriniSolution):
    """``(x^T samples, gamma, flags)``: outermost contact-to-positive crossing per tangential line.

    The crossing is placed by linear interpolation of ``U^{2/3}`` on the two
    nearest positive nodes, which is exact for the ``3/2``-homogeneous profile.
    """
    grid = sol.U.grid
    xn = grid.axes[-2]
    h = grid.spacing[-2]
    plane = sol.U.values[..., 0]
    contact = sol.contact
    tshape = plane.shape[:-1]
    gamma = np.full(tshape, np.nan)
    flags = np.zeros(tshape, dtype=bool)
    for t in np.ndindex(*tshape):
        c = contact[t]
        v = plane[t]
        if c.all() or not c.any():
            flags[t] = True
            continue
        trans = np.where(c[:-1] & ~c[1:])[0]
        if len(trans) > 1 or (~c[:-1] & c[1:]).sum() > 0:
            flags[t] = True
        i = trans[-1] if len(trans) else int(np.where(c)[0][-1])
        if i + 2 < len(xn):
            a, bb = v[i + 1] ** (2 / 3), v[i + 2] ** (2 / 3)
            g = xn[i + 1] - a * h / (bb - a) if bb > a else xn[i]
            gamma[t] = float(np.clip(g, xn[i], xn[i + 1]))
        else:
            gamma[t] = xn[i]
    xT = np.stack(np.meshgrid(*grid.axes[:-2], indexing="ij"), axis=-1) if grid.n > 1 else np.zeros((0,))
    return xT, gamma, flags


def _sphere_rule(d: int, nang: int = 256, nlat: int = 64, nlon: int = 128):
    """Unit-sphere nodes and weights (trapezoid in 2D, Gauss latitude x trapezoid longitude in 3D)."""
    if d == 2:
        th = 2 * np.pi * np.arange(nang) / nang
        return np.stack([np.cos(th), np.sin(th)], -1), np.full(nang, 2 * np.pi / nang)
    if d == 3:
        z, wz = np.polynomial.legendre.leggauss(nlat)
        ph = 2 * np.pi * np.arange(nlon) / nlon
        Z, PH = np.meshgrid(z, ph, indexing="ij")
        s = np.sqrt(1 - Z**2)
        pts = np.stack([s * np.cos(PH), s * np.sin(PH), Z], -1).reshape(-1, 3)
        w = (wz[:, None] * np.full(nlon, 2 * np.pi / nlon)[None, :]).ravel()
        return pts, w
    raise ValueError("spheres are implemented for n + 1 in {2, 3}")


def _sphere_integral(U, x0, r):
    d = U.grid.dim
    pts, w = _sphere_rule(d)
    vals = U(np.asarray(x0, dtype=float) + r * pts)
    return float(r ** (d - 1) * np.sum(w * vals**2)), float(np.sum(w) * r ** (d - 1))


def _ball_energy(U, x0, r):
    q = _quad(U.grid)
    gm, ge = q.gradients(U.values)
    c = np.asarray(x0, dtype=float)

    def region(p):
        return np.linalg.norm(p - c, axis=-1) <= r

    return q.integrate((gm**2).sum(-1), (ge**2).sum(-1), None, region)


_QCACHE: dict = {}


def _quad(grid):
    q = _QCACHE.get(grid)
    if q is None:
        _QCACHE.clear()
        q = _QCACHE[grid] = Quadrature(grid)
    return q


def frequency(U: FieldSample, x0=None, r: float = 0.5) -> float:
    """``N(r) = r int_{B_r} |grad U|^2 / int_{dB_r} U^2``."""
    d = U.grid.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    if U.grid.half and x0[-1] != 0.0:
        raise ValueError("half-grid fields need centres on the thin plane")
    den, _ = _sphere_integral(U, x0, r)
    if den <= 0.0:
        raise ValueError("vanishing boundary integral")
    return r * _ball_energy(U, x0, r) / den


@dataclass
class FrequencyProfile:
    center: np.ndarray
    radii: np.ndarray
    N: np.ndarray

    def monotonicity_violation(self) -> float:
        order = np.argsort(self.radii)
        dN = np.diff(self.N[order])
        return float(max(0.0, -dN.min())) if dN.size else 0.0


def frequency_profile(U: FieldSample, x0=None, radii=(0.1, 0.2, 0.3, 0.4, 0.5)) -> FrequencyProfile:
    d = U.grid.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    radii = np.asarray(radii, dtype=float)
    return FrequencyProfile(x0, radii, np.array([frequency(U, x0, r) for r in radii]))


def classify_regular(profile: FrequencyProfile, tau: float = 0.05, mono_tol: float = 0.01) -> dict:
    """Extrapolate ``N(r)`` linearly to ``r = 0`` and compare with ``3/2``."""
    if len(profile.radii) < 4:
        raise ValueError("classification needs at least four radii")
    slope, intercept = np.polyfit(profile.radii, profile.N, 1)
    viol = profile.monotonicity_violation()
    return {"regular": bool(abs(intercept - 1.5) < tau), "N0": float(intercept),
            "slope": float(slope), "monotone": bool(viol <= mono_tol), "violation": viol}


def blow_up(U: FieldSample, x0=None, r: float = 0.5, h: float | None = None) -> FieldSample:
    """``U_r(x) = U(r x + x0) / (mean_{dB_r} U^2)^{1/2}`` resampled on a unit-ball grid."""
    g = U.grid
    d = g.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    den, area = _sphere_integral(U, x0, r)
    if den <= 0.0:
        raise ValueError("vanishing normaliser")
    norm = np.sqrt(den / area)
    out = SlitGrid.box(g.n, h or float(g.spacing[0]), 1.0, g.coords, g.centering, g.half)
    vals = U(x0 + r * out.points) / norm
    return FieldSample(out, vals, U.parity, meta={"normaliser": norm, "radius": r})


def derivative_fields(sol, m: int) -> FieldSample:
    """Centred differences of ``U`` in direction ``m`` (0-based, ``m < n``).

    Thin-plane nodes next to the contact set use one-sided differences taken
    away from it.
    """
    U = sol.U if isinstance(sol, SignoriniSolution) else sol
    g = U.grid
    if not 0 <= m < g.n:
        raise ValueError("direction must be tangential or normal to the free boundary (m < n)")
    h = g.spacing[m]
    u = U.values
    out = np.gradient(u, h, axis=m, edge_order=1)
    if isinstance(sol, SignoriniSolution) and g.half:
        plane = u[..., 0]
        c = sol.contact
        dp = out[..., 0]
        fwd = np.zeros_like(plane)
        bwd = np.zeros_like(plane)
        sl = [slice(None)] * plane.ndim
        fwd_src = np.diff(plane, axis=m) / h
        lo = sl.copy()
        lo[m] = slice(0, -1)
        hi = sl.copy()
        hi[m] = slice(1, None)
        fwd[tuple(lo)] = fwd_src
        bwd[tuple(hi)] = fwd_src
        cn_prev = np.zeros_like(c)
        cn_next = np.zeros_like(c)
        cn_prev[tuple(hi)] = c[tuple(lo)]
        cn_next[tuple(lo)] = c[tuple(hi)]
        pos = ~c
        dp = np.where(pos & cn_prev & ~cn_next, fwd, dp)
        dp = np.where(pos & cn_next & ~cn_prev, bwd, dp)
        dp = np.where(c, 0.0, dp)
        out[..., 0] = dp
    return FieldSample(g, out, "even")
