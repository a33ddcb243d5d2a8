"""Matrix-valued coefficient fields ``A = A_D + x_{n+1} A_O``."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .geometry import hom_solution, straighten, unstraighten

__all__ = ["CoeffField", "holder_seminorm", "pullback_coefficients", "Pullback"]

MatrixFn = Callable[[np.ndarray], np.ndarray]


def _const(M: np.ndarray) -> MatrixFn:
    M = np.array(M, dtype=float)

    def f(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(M, p.shape[:-1] + M.shape).copy()

    return f


def holder_seminorm(fn: Callable, points: np.ndarray, alpha: float, rng=None, pairs: int = 4000) -> float:
    """Sampled ``C^alpha`` seminorm of ``fn`` (scalar, vector or matrix valued)."""
    rng = np.random.default_rng(0) if rng is None else rng
    points = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
    i = rng.integers(0, len(points), pairs)
    j = rng.integers(0, len(points), pairs)
    keep = i != j
    a, b = points[i[keep]], points[j[keep]]
    d = np.linalg.norm(a - b, axis=-1)
    keep = d > 0
    fa = np.asarray(fn(a[keep])).reshape(keep.sum(), -1)
    fb = np.asarray(fn(b[keep])).reshape(keep.sum(), -1)
    diff = np.linalg.norm(fa - fb, axis=-1)
    return float(np.max(diff / d[keep] ** alpha)) if diff.size else 0.0


class CoeffField:
    """Symmetric coefficient field on ``R^{n+1}`` with the even/odd block structure.

    ``A_D`` must vanish in the entries ``(i, n+1)`` for ``i <= n`` and ``A_O``
    must vanish everywhere else; both are even in ``x_{n+1}``.
    """

    def __init__(self, n: int, A_D: MatrixFn, A_O: MatrixFn | None = None, *,
                 lam: float = 1.0, Lam: float = 1.0, eps0: float = 0.0, alpha: float = 0.25):
        if n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        self.n = n
        self.A_D = A_D
        self.A_O = A_O if A_O is not None else _const(np.zeros((n + 1, n + 1)))
        self.lam = lam
        self.Lam = Lam
        self.eps0 = eps0
        self.alpha = alpha

    @property
    def dim(self) -> int:
        return self.n + 1

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return self.A_D(p) + p[..., -1][..., None, None] * self.A_O(p)

    @classmethod
    def identity(cls, n: int, alpha: float = 0.25) -> "CoeffField":
        return cls(n, _const(np.eye(n + 1)), alpha=alpha)

    @classmethod
    def constant(cls, Abar, alpha: float = 0.25) -> "CoeffField":
        Abar = np.asarray(Abar, dtype=float)
        hom_solution(Abar)  # validates structure
        ev = np.linalg.eigvalsh(Abar)
        return cls(Abar.shape[0] - 1, _const(Abar), lam=float(ev[0]), Lam=float(ev[-1]), alpha=alpha)

    @classmethod
    def perturbed(cls, n: int, eps0: float, seed: int = 0, alpha: float = 0.25,
                  base=None, modes: int = 3) -> "CoeffField":
        """``base + eps0 * Q(x)`` with ``Q(0) = 0`` and sampled ``[Q]_{C^alpha(B_1)} = 1``.

        ``Q`` is a random trigonometric field built to respect the block
        structure; ``x_{n+1}`` enters only through ``x_{n+1}^2``.
        """
        d = n + 1
        rng = np.random.default_rng(seed)
        base = np.eye(d) if base is None else np.asarray(base, dtype=float)
        freq = rng.normal(size=(modes, d)) * 1.5
        phase = rng.uniform(0, 2 * np.pi, size=modes)
        amp_D = rng.normal(size=(modes, d, d))
        amp_D = 0.5 * (amp_D + amp_D.transpose(0, 2, 1))
        amp_D[:, :-1, -1] = 0.0
        amp_D[:, -1, :-1] = 0.0
        amp_O = np.zeros((modes, d, d))
        amp_O[:, :-1, -1] = rng.normal(size=(modes, d - 1))
        amp_O[:, -1, :-1] = amp_O[:, :-1, -1]

        def waves(p):
            q = np.array(p, dtype=float, copy=True)
            q[..., -1] = q[..., -1] ** 2
            arg = q @ freq.T + phase
            return np.sin(arg) - np.sin(phase)

        def raw_D(p):
            return np.einsum("...k,kij->...ij", waves(p), amp_D)

        def raw_O(p):
            return np.einsum("...k,kij->...ij", waves(p), amp_O)

        def raw(p):
            p = np.asarray(p, dtype=float)
            return raw_D(p) + p[..., -1][..., None, None] * raw_O(p)

        sample = np.random.default_rng(seed + 1).uniform(-1, 1, size=(3000, d))
        sample = sample[np.linalg.norm(sample, axis=1) <= 1]
        semi = holder_seminorm(raw, sample, alpha, rng=np.random.default_rng(seed + 2))
        scale = eps0 / semi if semi > 0 else 0.0

        def A_D(p):
            return base + scale * raw_D(p)

        def A_O(p):
            return scale * raw_O(p)

        # operator norm of the perturbation, sampled on [-1.5, 1.5]^d with a safety factor
        probe = np.random.default_rng(seed + 3).uniform(-1.5, 1.5, size=(20000, d))
        bound = 1.25 * scale * float(np.max(np.linalg.norm(raw(probe), ord=2, axis=(1, 2))))
        ev = np.linalg.eigvalsh(base)
        field = cls(n, A_D, A_O, lam=float(ev[0] - bound), Lam=float(ev[-1] + bound),
                    eps0=eps0, alpha=alpha)
        if field.lam <= 0:
            raise ValueError("perturbation destroys ellipticity; lower eps0")
        return field

    def check_structure(self, points, tol: float = 1e-10) -> dict:
        """Sampled checks of ellipticity, block structure and parity."""
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        AD, AO = self.A_D(p), self.A_O(p)
        mirror = p.copy()
        mirror[:, -1] *= -1
        ev = np.linalg.eigvalsh(self(p))
        off = np.zeros((self.dim, self.dim), dtype=bool)
        off[:-1, -1] = off[-1, :-1] = True
        return {
            "elliptic": bool(ev.min() >= self.lam - tol and ev.max() <= self.Lam + tol and ev.min() > 0),
            "symmetric": bool(np.allclose(AD, np.swapaxes(AD, -1, -2), atol=tol)
                              and np.allclose(AO, np.swapaxes(AO, -1, -2), atol=tol)),
            "block_D": bool(np.all(np.abs(AD[:, off]) <= tol)),
            "block_O": bool(np.all(np.abs(AO[:, ~off]) <= tol)),
            "even": bool(np.allclose(AD, self.A_D(mirror), atol=tol)
                         and np.allclose(AO, self.A_O(mirror), atol=tol)),
        }

    def tangential_holder(self, points, h: float = 1e-4) -> float:
        """Sampled ``C^alpha`` seminorm of the tangential derivatives ``d_i A`` (i <= n)."""
        worst = 0.0
        for i in range(self.n):
            e = np.zeros(self.dim)
            e[i] = h

            def dA(p, e=e):
                return (self(p + e) - self(p - e)) / (2 * h)

            worst = max(worst, holder_seminorm(dA, points, self.alpha))
        return worst


def _graph_gradient(gamma, yT: np.ndarray, step: float) -> np.ndarray:
    """Centred-difference gradient of ``gamma`` at tangential points ``yT``."""
    k = yT.shape[-1]
    out = np.zeros(yT.shape)
    for i in range(k):
        e = np.zeros(k)
        e[i] = step
        out[..., i] = (np.asarray(gamma(yT + e)) - np.asarray(gamma(yT - e))) / (2 * step)
    return out


class Pullback:
    """Coefficients and data of the derivative equations after straightening.

    With ``x_n = y_n - gamma(y^T)`` and ``u_m = dU/dy_m`` the derivatives solve
    ``div(A grad u_m) = div(f_m) + phi_m`` where ``a = J b J^T``,
    ``J = dx/dy``, ``f_m = -J (d_{y_m} b) grad_y U`` and ``phi_m = d_{y_m} F``.
    """

    def __init__(self, B: CoeffField, gamma, F=None, step: float = 1e-4):
        self.B = B
        self.gamma = gamma
        self.F = F
        self.step = step
        self.n = B.n
        d = B.dim
        if self.n < 2:
            self._gamma = lambda yT: np.zeros(np.shape(yT)[:-1])
        else:
            self._gamma = gamma if callable(gamma) else (lambda yT, c=float(gamma): np.full(np.shape(yT)[:-1], c))

        def A_D(x):
            y, J = self._frame(x)
            return J @ B.A_D(y) @ np.swapaxes(J, -1, -2)

        def A_O(x):
            y, J = self._frame(x)
            return J @ B.A_O(y) @ np.swapaxes(J, -1, -2)

        self._d = d
        # ellipticity bounds of J b J^T, sampled on the unit box
        probe = np.random.default_rng(0).uniform(-1, 1, size=(2000, d))
        ev = np.linalg.eigvalsh(A_D(probe) + probe[:, -1, None, None] * A_O(probe))
        self.A = CoeffField(self.n, A_D, A_O, lam=0.9 * float(ev.min()), Lam=1.1 * float(ev.max()),
                            eps0=B.eps0, alpha=B.alpha)

    def to_y(self, x):
        x = np.asarray(x, dtype=float)
        return unstraighten(self._gamma, x) if self.n >= 2 else x.copy()

    def jacobian(self, y) -> np.ndarray:
        """``J = dx/dy``: identity except row ``n`` holds ``-d_i gamma``."""
        y = np.asarray(y, dtype=float)
        d = self._d
        J = np.broadcast_to(np.eye(d), y.shape[:-1] + (d, d)).copy()
        if self.n >= 2:
            J[..., d - 2, : d - 2] = -_graph_gradient(self._gamma, y[..., : d - 2], self.step)
        return J

    def _frame(self, x):
        y = self.to_y(x)
        return y, self.jacobian(y)

    def f(self, m: int, x, grad_yU) -> np.ndarray:
        """Drift ``f_m`` at physical-x points given ``grad_y U`` there (0-based ``m < n``)."""
        if not 0 <= m < self.n:
            raise ValueError("direction must satisfy m < n")
        x = np.asarray(x, dtype=float)
        grad_yU = np.asarray(grad_yU, dtype=float)
        if grad_yU.shape != x.shape:
            raise ValueError("inconsistent shapes of points and gradients")
        y, J = self._frame(x)
        e = np.zeros(self._d)
        e[m] = self.step
        dB = (self.B(y + e) - self.B(y - e)) / (2 * self.step)
        return -np.einsum("...ip,...pq,...q->...i", J, dB, grad_yU)

    def phi(self, m: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.F is None:
            return np.zeros(x.shape[:-1])
        y = self.to_y(x)
        e = np.zeros(self._d)
        e[m] = self.step
        return (np.asarray(self.F(y + e)) - np.asarray(self.F(y - e))) / (2 * self.step)


def pullback_coefficients(B: CoeffField, gamma, F=None, step: float = 1e-4) -> Pullback:
    """Pull the coefficient field and data back through ``x_n = y_n - gamma(y^T)``."""
    return Pullback(B, gamma, F, step)
