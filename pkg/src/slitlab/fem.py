"""Multilinear finite elements on vertex grids (physical or square-root coordinates)."""
from __future__ import annotations

from itertools import product

import numpy as np
from scipy import sparse

from .geometry import perp_weights
from .grid import Quadrature, SlitGrid, weight_function

__all__ = ["gradient_map", "stiffness", "load_vector", "restrict", "node_index"]


def node_index(grid: SlitGrid) -> np.ndarray:
    return np.arange(grid.size).reshape(grid.node_shape)


def gradient_map(grid: SlitGrid, q: np.ndarray) -> np.ndarray:
    """Matrix ``P`` with ``grad_x = P grad_y`` at grid-coordinate points ``q``."""
    d = grid.dim
    P = np.broadcast_to(np.eye(d), q.shape[:-1] + (d, d)).copy()
    if grid.coords == "sqrt":
        xi, eta = q[..., -2], q[..., -1]
        rho = xi**2 + eta**2
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(rho > 0, 1.0 / (2.0 * np.where(rho > 0, rho, 1.0)), 0.0)
        P[..., -2, -2] = xi * s
        P[..., -2, -1] = -eta * s
        P[..., -1, -2] = eta * s
        P[..., -1, -1] = xi * s
    return P


def _shape(t, corners, h):
    d = len(t)
    N = np.array([np.prod([t[k] if c[k] else 1 - t[k] for k in range(d)]) for c in corners])
    dN = np.array([[np.prod([(t[m] if c[m] else 1 - t[m]) if m != k else (1.0 if c[k] else -1.0)
                             for m in range(d)]) / h[k] for k in range(d)] for c in corners])
    return N, dN


def _corner_nodes(grid: SlitGrid, c):
    idx = node_index(grid)
    return idx[tuple(slice(ck, None if ck else -1) for ck in c)].ravel()


def _quad(grid: SlitGrid) -> Quadrature:
    if grid.centering != "vertex":
        raise ValueError("finite elements need a vertex grid")
    return Quadrature(grid, refine_tip=False)


def stiffness(grid: SlitGrid, A, weight: str | None = None, quad: Quadrature | None = None) -> sparse.csr_matrix:
    """``K_ab = int c(x) grad phi_a . A grad phi_b dx`` with ``c`` a named weight.

    ``A`` maps physical points ``(..., d)`` to matrices ``(..., d, d)``.
    """
    q = quad or _quad(grid)
    d = grid.dim
    h = grid.spacing
    corners = list(product((0, 1), repeat=d))
    nodes = [_corner_nodes(grid, c) for c in corners]
    ncell = nodes[0].size
    nc = len(corners)
    Ke = np.zeros((nc, nc, ncell))
    for gi, g in enumerate(q.gauss):
        t = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])[list(g)]
        _, dN = _shape(t, corners, h)
        pts = q.points[gi].reshape(-1, d)
        P = gradient_map(grid, q._qgrid[gi].reshape(-1, d))
        Ap = np.asarray(A(pts), dtype=float)
        if Ap.shape != (ncell, d, d):
            raise ValueError("coefficient field returned the wrong shape")
        c = q.weights[gi].ravel() * weight_function(weight, pts)
        M = np.einsum("qki,qkl,qlj->qij", P, Ap, P) * c[:, None, None]
        G = np.einsum("aj,qij->aqi", dN, M)  # M dN_a
        Ke += np.einsum("bi,aqi->abq", dN, G)
    rows = np.concatenate([np.repeat(nodes[a][None], nc, 0).ravel() for a in range(nc)])
    cols = np.concatenate([np.stack([nodes[b] for b in range(nc)]).ravel() for _ in range(nc)])
    K = sparse.coo_matrix((Ke.ravel(), (rows, cols)), shape=(grid.size, grid.size)).tocsr()
    K.sum_duplicates()
    return K


def load_vector(grid: SlitGrid, vec=None, scal=None, weight: str | None = None,
                quad: Quadrature | None = None) -> np.ndarray:
    """``b_a = int c(x) (vec . grad phi_a - scal * phi_a) dx``.

    ``vec`` maps physical points to vectors and ``scal`` to scalars.
    """
    q = quad or _quad(grid)
    d = grid.dim
    h = grid.spacing
    corners = list(product((0, 1), repeat=d))
    nodes = [_corner_nodes(grid, c) for c in corners]
    b = np.zeros(grid.size)
    if vec is None and scal is None:
        return b
    for gi, g in enumerate(q.gauss):
        t = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])[list(g)]
        N, dN = _shape(t, corners, h)
        pts = q.points[gi].reshape(-1, d)
        c = q.weights[gi].ravel() * weight_function(weight, pts)
        if vec is not None:
            v = np.asarray(vec(pts), dtype=float).reshape(-1, d)
            P = gradient_map(grid, q._qgrid[gi].reshape(-1, d))
            pv = np.einsum("qij,qi->qj", P, v) * c[:, None]  # P^T v
            for a in range(len(corners)):
                b += np.bincount(nodes[a], pv @ dN[a], minlength=grid.size)
        if scal is not None:
            s = np.asarray(scal(pts), dtype=float).reshape(-1) * c
            for a in range(len(corners)):
                b -= np.bincount(nodes[a], N[a] * s, minlength=grid.size)
    return b


def restrict(K: sparse.csr_matrix, b: np.ndarray, fixed: np.ndarray, values: np.ndarray):
    """Eliminate Dirichlet nodes: returns ``(K_II, b_I - K_IB u_B, free)``."""
    fixed = np.asarray(fixed, dtype=bool).ravel()
    free = ~fixed
    ub = np.asarray(values, dtype=float).ravel()[fixed]
    Kff = K[free][:, free]
    rhs = b[free] - K[free][:, fixed] @ ub
    return Kff.tocsr(), rhs, free
