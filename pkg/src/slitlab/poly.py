"""Linear "polynomials" in ``(x_1, ..., x_n, rho)``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LinearPoly", "poly_basis"]


def _rho_kappa(p, kappa):
    return np.hypot(p[..., -2], kappa * p[..., -1])


def poly_basis(p, center=None, kappa: float = 1.0) -> np.ndarray:
    """Basis ``[1, x_1 - c_1, ..., x_{n-1} - c_{n-1}, x_n, rho_kappa]`` at ``p``.

    ``center`` shifts the tangential coordinates so that the constant term is
    the value at the centre point.
    """
    p = np.asarray(p, dtype=float)
    d = p.shape[-1]
    c = np.zeros(d - 2) if center is None else np.asarray(center, dtype=float).reshape(d - 2)
    cols = [np.ones(p.shape[:-1])]
    cols += [p[..., i] - c[i] for i in range(d - 2)]
    cols.append(p[..., -2])
    cols.append(_rho_kappa(p, kappa))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class LinearPoly:
    """``L(x) = c0 + sum_i c_i (x_i - center_i) + c_rho * rho_kappa(x)``.

    ``c`` has length ``n``; the last entry multiplies ``x_n``.  With
    ``kappa = 1`` the last basis function is plain ``rho``.
    """

    c0: float
    c: tuple
    c_rho: float
    center: tuple = field(default=())
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in np.atleast_1d(self.c)))
        n = len(self.c)
        center = tuple(float(v) for v in np.atleast_1d(self.center)) if len(np.atleast_1d(self.center)) else (0.0,) * (n - 1)
        if len(center) != n - 1:
            raise ValueError("center must have n - 1 entries")
        object.__setattr__(self, "center", center)
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.c0, *self.c, self.c_rho])

    @classmethod
    def from_coef(cls, coef, center=(), kappa: float = 1.0) -> "LinearPoly":
        coef = np.asarray(coef, dtype=float)
        return cls(float(coef[0]), tuple(coef[1:-1]), float(coef[-1]), center, kappa)

    @classmethod
    def zero(cls, n: int) -> "LinearPoly":
        return cls(0.0, (0.0,) * n, 0.0)

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.n + 1:
            raise ValueError("point dimension does not match the polynomial")
        return poly_basis(p, self.center, self.kappa) @ self.coef

    def gradient(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        out[..., :-1] = self.c
        r = _rho_kappa(p, self.kappa)
        safe = np.where(r > 0, r, 1.0)
        out[..., -2] += np.where(r > 0, self.c_rho * p[..., -2] / safe, 0.0)
        out[..., -1] += np.where(r > 0, self.c_rho * self.kappa**2 * p[..., -1] / safe, 0.0)
        return out

    def _same_frame(self, other):
        if (self.n, self.center, self.kappa) != (other.n, other.center, other.kappa):
            raise ValueError("polynomials live in different frames")

    def __add__(self, other: "LinearPoly") -> "LinearPoly":
        self._same_frame(other)
        return LinearPoly.from_coef(self.coef + other.coef, self.center, self.kappa)

    def __sub__(self, other: "LinearPoly") -> "LinearPoly":
        self._same_frame(other)
        return LinearPoly.from_coef(self.coef - other.coef, self.center, self.kappa)

    def as_dict(self) -> dict:
        return {"c0": self.c0, "c": list(self.c), "c_rho": self.c_rho,
                "center": list(self.center), "kappa": self.kappa}
