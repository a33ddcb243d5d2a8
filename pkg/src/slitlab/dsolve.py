"""Solvers for the degenerate equation ``div(xi^2 A grad w) = div(xi^2 f) + xi^2 g``
and the uniform equation ``div(A grad u) = div(f / sqrt(rho))`` with ``u = 0`` on the slit.

Both are discretised with multilinear elements in square-root coordinates,
where the slit is the face ``{xi = 0}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import LinearOperator, cg

from .coefficients import CoeffField, holder_seminorm
from .fem import load_vector, restrict, stiffness
from .geometry import grad_rho, perp_weights
from .grid import FieldSample, Quadrature, SlitGrid
from .poly import LinearPoly
from .wspace import Ball, fit_linear_poly, quadrature_for

__all__ = [
    "LinearPoly",
    "PointwiseHolderField",
    "DegenerateProblem",
    "UniformProblem",
    "SolveReport",
    "CampanatoIteration",
    "assemble",
    "solve_degenerate",
    "solve_uniform",
    "harmonic_replacement",
    "linearize",
    "campanato_iterate",
    "absorb_scalar_phi",
    "absorb_h_term",
]

MIN_CELLS = 8


class PointwiseHolderField:
    """``f = sum_i c_i e_i + c_rho grad rho + f_alpha`` with ``|f_alpha(x)| <= c_alpha |x|^alpha``."""

    def __init__(self, n: int, c=None, c_rho: float = 0.0, remainder: Callable | None = None,
                 c_alpha: float = 0.0, alpha: float = 0.25):
        self.n = n
        self.c = np.zeros(n) if c is None else np.asarray(c, dtype=float).reshape(n)
        self.c_rho = float(c_rho)
        self.remainder = remainder
        self.c_alpha = float(c_alpha)
        self.alpha = alpha

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape)
        out[..., :-1] = self.c
        out = out + self.c_rho * grad_rho(p)
        if self.remainder is not None:
            out = out + np.asarray(self.remainder(p), dtype=float)
        return out

    def leading_poly(self) -> LinearPoly:
        """The linear "polynomial" whose gradient is the constant part of ``f``."""
        return LinearPoly(0.0, tuple(self.c), self.c_rho)

    def check_decay(self, points, tol: float = 1e-12) -> bool:
        if self.remainder is None:
            return True
        p = np.asarray(points, dtype=float)
        r = np.linalg.norm(np.asarray(self.remainder(p)), axis=-1)
        return bool(np.all(r <= self.c_alpha * np.linalg.norm(p, axis=-1) ** self.alpha + tol))


def _zero(p):
    return np.zeros(np.asarray(p).shape[:-1])


@dataclass
class DegenerateProblem:
    A: CoeffField
    f: Callable | None = None
    g: Callable | None = None
    alpha: float = 0.25
    boundary: Callable = _zero
    problem_id: str = "degenerate"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def p(self) -> float:
        """Integrability exponent ``(n + 3) / (1 - alpha)`` for ``g``."""
        return (self.n + 3) / (1 - self.alpha)


@dataclass
class UniformProblem:
    A: CoeffField
    f: Callable | None = None
    boundary: Callable = _zero
    problem_id: str = "uniform"

    @property
    def n(self) -> int:
        return self.A.n


@dataclass
class SolveReport:
    problem_id: str
    h: float
    iterations: int
    residual: float
    energy: float
    bounds_checked: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"problem_id": self.problem_id, "h": self.h, "iterations": self.iterations,
                "residual": self.residual, "energy": self.energy,
                "bounds_checked": list(self.bounds_checked)}


def _check_grid(grid: SlitGrid, n: int):
    if grid.coords != "sqrt":
        raise ValueError("the degenerate and uniform solvers use square-root coordinates")
    if grid.n != n:
        raise ValueError("grid dimension does not match the problem")
    if min(grid.cells) < MIN_CELLS:
        raise ValueError(f"grid too coarse: need at least {MIN_CELLS} cells per axis")


def _check_elliptic(A, quad: Quadrature):
    pts = quad.points.reshape(-1, quad.grid.dim)
    ev = np.linalg.eigvalsh(A(pts[:: max(1, len(pts) // 20000)]))
    if ev.min() <= 0:
        raise ValueError("coefficient field is not elliptic on the grid")


def assemble(problem, grid: SlitGrid):
    """Stiffness matrix and load vector of the weak form.

    Degenerate problems: ``int xi^2 grad phi . A grad w = int xi^2 f . grad phi - int xi^2 g phi``.
    Uniform problems: ``int grad phi . A grad u = int (f / sqrt(rho)) . grad phi``.
    """
    _check_grid(grid, problem.n)
    quad = Quadrature(grid, refine_tip=False)
    _check_elliptic(problem.A, quad)
    if isinstance(problem, DegenerateProblem):
        K = stiffness(grid, problem.A, "xi2", quad)
        b = load_vector(grid, problem.f, problem.g, "xi2", quad)
    elif isinstance(problem, UniformProblem):
        K = stiffness(grid, problem.A, None, quad)
        vec = None
        if problem.f is not None:
            def vec(p, f=problem.f):
                rho = perp_weights(p)[0]
                return np.asarray(f(p)) / np.sqrt(np.where(rho > 0, rho, np.inf))[..., None]
        b = load_vector(grid, vec, None, None, quad)
    else:
        raise TypeError("unknown problem type")
    return K, b


def pcg(K, b, x0=None, rtol: float = 1e-10, maxiter: int = 100000):
    """Jacobi-preconditioned conjugate gradients; returns ``(x, iterations, relres)``."""
    d = K.diagonal()
    if np.any(d <= 0):
        raise ValueError("stiffness has a non-positive diagonal entry")
    inv = 1.0 / d
    M = LinearOperator(K.shape, matvec=lambda v: inv * v)
    count = [0]

    def cb(_):
        count[0] += 1

    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros_like(b), 0, 0.0
    x, info = cg(K, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    rel = float(np.linalg.norm(b - K @ x) / bn)
    if info != 0 or rel > 10 * rtol:
        cond = float(d.max() / d.min())
        raise RuntimeError(f"CG did not converge: {count[0]} iterations, residual {rel:.3g}, "
                           f"diagonal condition estimate {cond:.3g}")
    return x, count[0], rel


def _solve(problem, grid, fixed, values, domain=None):
    K, b = assemble(problem, grid)
    if domain is not None:
        fixed = fixed | ~np.asarray(domain(grid.points), dtype=bool)
    Kff, rhs, free = restrict(K, b, fixed, values)
    u = np.asarray(values, dtype=float).ravel().copy()
    x, iters, rel = pcg(Kff, rhs) if free.any() else (np.zeros(0), 0, 0.0)
    u[free] = x
    energy = float(u @ (K @ u))
    report = SolveReport(problem.problem_id, float(grid.spacing[-1]), iters, rel, energy)
    return u.reshape(grid.node_shape), K, b, report


def _outer_fixed(grid: SlitGrid, keep_slit_free: bool):
    m = grid.boundary_mask.copy()
    if keep_slit_free:
        # the face {xi = 0} is not a Dirichlet boundary, except where it meets other faces
        face = grid.nodes[..., -2] == 0.0
        other = np.zeros_like(m)
        for k in range(grid.dim):
            if k == grid.dim - 2:
                continue
            sl = [slice(None)] * grid.dim
            sl[k] = 0
            other[tuple(sl)] = True
            sl[k] = -1
            other[tuple(sl)] = True
        sl = [slice(None)] * grid.dim
        sl[grid.dim - 2] = -1
        other[tuple(sl)] = True
        m = np.where(face & ~other, False, m)
    return m


def solve_degenerate(problem: DegenerateProblem, grid: SlitGrid, domain=None) -> FieldSample:
    """Weak solution with Dirichlet data on the outer boundary and none on ``{xi = 0}``.

    ``domain`` optionally restricts the solve to a region (a callable on
    physical points); nodes outside it keep the boundary data.
    """
    fixed = _outer_fixed(grid, keep_slit_free=True)
    values = np.asarray(problem.boundary(grid.points), dtype=float)
    u, K, b, report = _solve(problem, grid, fixed, values, domain)
    if problem.f is None and problem.g is None:
        ext = values.ravel()
        ok = report.energy <= float(ext @ (K @ ext)) * (1 + 1e-9) + 1e-14
        report.bounds_checked.append({"name": "energy_le_extension", "pass": bool(ok)})
    return FieldSample(grid, u, meta={"report": report})


def solve_uniform(problem: UniformProblem, grid: SlitGrid, domain=None) -> FieldSample:
    """Solution with zero trace on the slit and Dirichlet data on the outer boundary."""
    fixed = grid.boundary_mask | (grid.nodes[..., -2] == 0.0)
    values = np.asarray(problem.boundary(grid.points), dtype=float)
    values = np.where(grid.nodes[..., -2] == 0.0, 0.0, values)
    u, K, b, report = _solve(problem, grid, fixed, values, domain)
    return FieldSample(grid, u, meta={"report": report})


def _ball_box(grid: SlitGrid, radius: float, center):
    d = grid.dim
    c = np.zeros(d - 2) if len(center) == 0 else np.asarray(center, dtype=float)
    s = np.sqrt(radius)
    lo = list(c - radius) + [0.0, -s]
    hi = list(c + radius) + [s, s]
    return lo, hi


def harmonic_replacement(w: FieldSample, radius: float, center=(), Abar=None) -> FieldSample:
    """Solve ``div(xi^2 Abar grad h) = 0`` in ``B_radius(center)`` with ``h = w`` outside.

    Returns a field on the same grid as ``w`` that equals ``w`` off the ball.
    """
    grid = w.grid
    if grid.coords != "sqrt":
        raise ValueError("harmonic replacement runs in square-root coordinates")
    A = CoeffField.identity(grid.n) if Abar is None else CoeffField.constant(Abar)
    lo, hi = _ball_box(grid, radius, center)
    sub, idx = grid.crop(lo, hi)
    if min(sub.cells) < MIN_CELLS:
        raise ValueError("ball not resolved by the grid")
    ball = Ball(radius, tuple(center) + (0.0, 0.0)) if len(center) else Ball(radius)
    local = w.values[idx]
    prob = DegenerateProblem(A, problem_id="harmonic_replacement")
    fixed = _outer_fixed(sub, keep_slit_free=True) | ~ball(sub.points)
    u, _, _, report = _solve(prob, sub, fixed, local)
    out = w.values.copy()
    out[idx] = u
    return FieldSample(grid, out, w.parity, meta={"report": report})


def linearize(h: FieldSample, radius: float, center=(), kappa: float = 1.0) -> LinearPoly:
    """Weighted ``1/rho`` least-squares projection onto ``span{1, x_1, ..., x_n, rho}``."""
    L, _ = fit_linear_poly(h, radius, center, kappa)
    return L


@dataclass
class CampanatoIteration:
    L: LinearPoly
    levels: list
    lambda_shrink: float
    alpha: float

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([lv["sigma"] for lv in self.levels])

    def bounded(self, factor: float = 10.0) -> bool:
        s = self.sigmas
        return bool(np.all(np.isfinite(s)) and s.max() <= factor * max(s[0], 1e-300))


def _ball_integral(w: FieldSample, r: float, values_fn, kind):
    q = quadrature_for(w.grid)
    ball = Ball(r)
    vm, ve = values_fn(q)
    return q.integrate(vm, ve, kind, ball)


def campanato_iterate(w: FieldSample, problem: DegenerateProblem | None = None,
                      lambda_shrink: float = 0.25, K: int = 3, alpha: float | None = None,
                      eps0: float | None = None) -> CampanatoIteration:
    """Run ``w_{k+1} = w_k - l_k`` with ``l_k`` the linearization of the replacement on ``B_{lambda^k/2}``.

    Level ``k`` records ``sigma_k``, ``phi_k = [f_k]_{C^alpha}`` and ``gamma_k``
    on ``B_{lambda^k}``; levels the grid cannot resolve are marked and stop
    the iteration.
    """
    grid = w.grid
    n = grid.n
    A = problem.A if problem is not None else CoeffField.identity(n)
    alpha = alpha if alpha is not None else (problem.alpha if problem is not None else A.alpha)
    eps0 = A.eps0 if eps0 is None else eps0
    lo_win = eps0 ** (2.0 / (n + 4)) if eps0 > 0 else 0.0
    if not lo_win - 1e-12 <= lambda_shrink <= 0.25:
        raise ValueError(f"lambda must lie in [{lo_win:.4g}, 1/4]")
    if K < 1:
        raise ValueError("K must be positive")
    f = problem.f if problem is not None else None
    g = problem.g if problem is not None else None
    expo = n + 2 + 2 * alpha
    wk = w
    L = LinearPoly.zero(n)
    fk = f
    levels = []
    rng = np.random.default_rng(0)
    for k in range(K):
        r = lambda_shrink**k
        hs = grid.spacing[-1]
        resolved = np.sqrt(r / 2) >= MIN_CELLS * hs and (n == 1 or r / 2 >= MIN_CELLS * grid.spacing[0])
        if not resolved:
            levels.append({"k": k, "r": r, "sigma": float("nan"), "phi": float("nan"),
                           "gamma": float("nan"), "resolved": False})
            break
        wl2 = _ball_integral(wk, r, lambda q: (q.values(wk.values)[0] ** 2, q.values(wk.values)[1] ** 2), "inv_rho")
        sigma = float(np.sqrt(wl2 / r**expo))
        pts = grid.points[Ball(r)(grid.points)]
        phi = 0.0
        if fk is not None and len(pts) > 1:
            phi = holder_seminorm(fk, pts, alpha, rng=rng, pairs=3000)
        gamma = 0.0
        if g is not None:
            def gv(q):
                return (np.asarray(g(q.points)) ** 2,
                        np.asarray(g(q.xpoints)) ** 2 if len(q.xpoints) else np.zeros(0))
            gamma = float(np.sqrt(_ball_integral(wk, r, gv, "rho_xi4") / r**expo))
        hk = harmonic_replacement(wk, r / 2)
        lk = linearize(hk, r / 2)
        levels.append({"k": k, "r": r, "sigma": sigma, "phi": phi, "gamma": gamma,
                       "resolved": True, "l": lk.as_dict()})
        wk = wk.with_values(wk.values - lk(grid.points))
        L = L + lk
        if fk is not None or problem is not None:
            fk = _next_f(fk, A, lk)
    return CampanatoIteration(L, levels, lambda_shrink, alpha)


def _next_f(fk, A, lk):
    def f_next(p, fk=fk):
        p = np.asarray(p, dtype=float)
        gl = lk.gradient(p)
        corr = gl - np.einsum("...ij,...j->...i", A(p), gl)
        base = np.zeros(p.shape) if fk is None else np.asarray(fk(p))
        return base + corr

    return f_next


def absorb_scalar_phi(phi, grid: SlitGrid) -> np.ndarray:
    """Vector field ``e_{n+1} int_0^{x_{n+1}} phi dh`` on the nodes of a physical vertex grid.

    ``phi`` is a callable on physical points or an array of node values.
    """
    if grid.coords != "physical" or grid.centering != "vertex":
        raise ValueError("absorb_scalar_phi needs a physical vertex grid")
    vals = np.asarray(phi(grid.points) if callable(phi) else phi, dtype=float)
    y = grid.axes[-1]
    j0 = int(np.argmin(np.abs(y)))
    if abs(y[j0]) > 1e-12:
        raise ValueError("x_{n+1} = 0 must be a node row")
    col = np.zeros(vals.shape)
    up = cumulative_trapezoid(vals[..., j0:], y[j0:], axis=-1, initial=0.0)
    col[..., j0:] = up
    if j0 > 0:
        down = cumulative_trapezoid(vals[..., j0::-1], y[j0::-1], axis=-1, initial=0.0)
        col[..., j0::-1] = down
    out = np.zeros(vals.shape + (grid.dim,))
    out[..., -1] = col
    return out


def absorb_h_term(h: Callable, points, nodes: int = 16) -> np.ndarray:
    """``f = int_0^1 s h(s x + (1 - s) x^T) ds grad rho`` so that ``div(xi^2 f) = xi^2 h / rho``."""
    p = np.asarray(points, dtype=float)
    s, ws = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1)
    ws = 0.5 * ws
    base = p.copy()
    base[..., -2:] = 0.0
    acc = np.zeros(p.shape[:-1])
    for si, wi in zip(s, ws):
        acc += wi * si * np.asarray(h(si * p + (1 - si) * base), dtype=float)
    return acc[..., None] * grad_rho(p)
