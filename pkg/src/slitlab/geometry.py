"""Slit-domain geometry.

Points are arrays whose last axis has length ``n + 1`` and is ordered
``(x_1, ..., x_{n-1}, x_n, x_{n+1})``: the first ``n - 1`` entries are the
tangential coordinates ``x^T`` and the last two form ``x^perp``.  The slit is
``S = {x_n < 0, x_{n+1} = 0}``.  A signed zero in ``x_{n+1}`` selects the lip
of the slit (``+0.0`` upper, ``-0.0`` lower).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "perp_weights",
    "on_slit",
    "sqrt_map",
    "inverse_map",
    "HomSolution",
    "hom_solution",
    "hom_eval",
    "path_distance",
    "Cone",
    "cone_project",
    "straighten",
    "unstraighten",
    "grad_rho",
]


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[-1] < 2:
        raise ValueError("points need a last axis of length n + 1 >= 2")
    return p


def _complex(re, im) -> np.ndarray:
    # x + 1j*y would turn an imaginary -0.0 into +0.0 and lose the lip
    re, im = np.broadcast_arrays(re, im)
    z = np.empty(re.shape, dtype=complex)
    z.real = re
    z.imag = im
    return z


def perp_weights(p):
    """Return ``(rho, xi, eta)`` at the points ``p``.

    ``xi + i eta`` is the principal square root of ``x_n + i x_{n+1}``, so
    ``xi >= 0`` everywhere and ``xi = 0`` on the slit.
    """
    p = _as_points(p)
    z = _complex(p[..., -2], p[..., -1])
    s = np.sqrt(z)
    return np.abs(z), s.real, s.imag


def on_slit(p) -> np.ndarray:
    p = _as_points(p)
    return (p[..., -2] < 0) & (p[..., -1] == 0)


def grad_rho(p) -> np.ndarray:
    """Gradient of ``rho = |x^perp|``; zero on the edge ``rho = 0``."""
    p = _as_points(p)
    rho = np.hypot(p[..., -2], p[..., -1])
    out = np.zeros_like(p)
    safe = np.where(rho > 0, rho, 1.0)
    out[..., -2] = np.where(rho > 0, p[..., -2] / safe, 0.0)
    out[..., -1] = np.where(rho > 0, p[..., -1] / safe, 0.0)
    return out


def sqrt_map(p) -> np.ndarray:
    """Map ``(x^T, x_n, x_{n+1})`` to ``(x^T, xi, eta)``; opens the slit onto ``{xi = 0}``."""
    p = _as_points(p)
    _, xi, eta = perp_weights(p)
    out = p.copy()
    out[..., -2] = xi
    out[..., -1] = eta
    return out


def inverse_map(q) -> np.ndarray:
    """Map ``(x^T, xi, eta)`` with ``xi >= 0`` back to physical coordinates."""
    q = _as_points(q)
    xi, eta = q[..., -2], q[..., -1]
    if np.any(xi < 0):
        raise ValueError("inverse_map requires xi >= 0")
    out = q.copy()
    out[..., -2] = xi**2 - eta**2
    out[..., -1] = 2.0 * xi * eta
    return out


@dataclass(frozen=True)
class HomSolution:
    """Positive 1/2-homogeneous solution for a constant matrix ``Abar``."""

    kappa: float
    Abar: np.ndarray

    def __call__(self, p) -> np.ndarray:
        return hom_eval(self, p)


def hom_solution(Abar) -> HomSolution:
    Abar = np.asarray(Abar, dtype=float)
    if Abar.ndim != 2 or Abar.shape[0] != Abar.shape[1] or Abar.shape[0] < 2:
        raise ValueError("Abar must be a square matrix of size n + 1 >= 2")
    if not np.allclose(Abar, Abar.T, atol=1e-12):
        raise ValueError("Abar must be symmetric")
    if np.linalg.eigvalsh(Abar)[0] <= 0:
        raise ValueError("Abar is not elliptic")
    if np.any(np.abs(Abar[:-1, -1]) > 1e-12):
        raise ValueError("Abar must have zero (i, n+1) entries for i <= n")
    kappa = float(np.sqrt(Abar[-2, -2] / Abar[-1, -1]))
    return HomSolution(kappa=kappa, Abar=Abar.copy())


def hom_eval(h: HomSolution | float, p) -> np.ndarray:
    """Evaluate ``sqrt((x_n + sqrt(x_n^2 + kappa^2 x_{n+1}^2)) / 2)``.

    ``h`` may be a :class:`HomSolution` or a bare ``kappa`` (scalar or array
    broadcasting against the points).
    """
    p = _as_points(p)
    kappa = h.kappa if isinstance(h, HomSolution) else np.asarray(h, dtype=float)
    return np.sqrt(_complex(p[..., -2], kappa * p[..., -1])).real


def _side(y: np.ndarray) -> np.ndarray:
    # +1 above the thin plane (or on the upper lip), -1 below
    return np.where(np.signbit(y), -1.0, 1.0)


def path_distance(p, q) -> np.ndarray:
    """Length of the shortest path from ``p`` to ``q`` avoiding the slit.

    The path metric on ``R^{n+1} \\ S`` splits as the product of the
    tangential Euclidean distance with the planar geodesic distance in the
    plane cut along the negative ``x_n`` axis.  The planar geodesic is the
    straight segment unless that segment crosses the open slit, in which case
    it bends through the tip.
    """
    p, q = np.broadcast_arrays(_as_points(p), _as_points(q))
    dT2 = np.sum((p[..., :-2] - q[..., :-2]) ** 2, axis=-1)
    a = p[..., -2:]
    b = q[..., -2:]
    straight = np.linalg.norm(a - b, axis=-1)
    around = np.linalg.norm(a, axis=-1) + np.linalg.norm(b, axis=-1)
    ya, yb = a[..., 1], b[..., 1]
    opposite = _side(ya) != _side(yb)
    denom = ya - yb
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom != 0, ya / np.where(denom != 0, denom, 1.0), 0.0)
    xc = a[..., 0] + t * (b[..., 0] - a[..., 0])
    # both on the slit, opposite lips: crossing point is the lip abscissa
    both_plane = (ya == 0) & (yb == 0)
    xc = np.where(both_plane, np.minimum(a[..., 0], b[..., 0]), xc)
    blocked = opposite & (xc < 0)
    dperp = np.where(blocked, around, straight)
    return np.sqrt(dT2 + dperp**2)


@dataclass(frozen=True)
class Cone:
    """``{y : |y^perp| <= radius, |y^T - center| <= |y^perp|} \\ S``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if not self.radius > 0:
            raise ValueError("cone radius must be positive")

    def contains(self, y) -> np.ndarray:
        y = _as_points(y)
        rperp = np.hypot(y[..., -2], y[..., -1])
        dT = np.linalg.norm(y[..., :-2] - self.center[: y.shape[-1] - 2], axis=-1)
        return (rperp <= self.radius) & (dT <= rperp) & ~on_slit(y)


def cone_project(y, cone: Cone) -> np.ndarray:
    """Push ``y`` radially in ``x^perp`` onto the boundary of the cone's opening."""
    y = _as_points(y)
    rperp = np.hypot(y[..., -2], y[..., -1])
    if np.any(rperp == 0):
        raise ValueError("cone_project needs y^perp != 0")
    if np.any(on_slit(y)):
        raise ValueError("cone_project needs y off the slit")
    dT = np.linalg.norm(y[..., :-2] - cone.center[: y.shape[-1] - 2], axis=-1)
    w = y.copy()
    w[..., -2:] *= (dT / rperp)[..., None]
    return w


def _gamma_values(gamma: Callable | float, yT: np.ndarray) -> np.ndarray:
    if callable(gamma):
        g = np.asarray(gamma(yT), dtype=float)
    else:
        g = np.full(yT.shape[:-1], float(gamma))
    if np.any(~np.isfinite(g)):
        raise ValueError("graph function undefined at some tangential points")
    return g


def straighten(gamma, y) -> np.ndarray:
    """``x_n = y_n - gamma(y^T)``; other coordinates unchanged."""
    y = _as_points(y)
    x = y.copy()
    x[..., -2] = y[..., -2] - _gamma_values(gamma, y[..., :-2])
    return x


def unstraighten(gamma, x) -> np.ndarray:
    x = _as_points(x)
    y = x.copy()
    y[..., -2] = x[..., -2] + _gamma_values(gamma, x[..., :-2])
    return y
