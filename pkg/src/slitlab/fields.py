"""Named analytic fields used as boundary data and test inputs."""
from __future__ import annotations

import numpy as np

from .geometry import perp_weights

__all__ = ["FIELDS", "get_field", "model_solution", "curved_model", "random_bump"]


def _z(p):
    return p[..., -2] + 1j * p[..., -1]


def model_solution(p):
    """``Re((x_n + i x_{n+1})^{3/2})``."""
    p = np.asarray(p, dtype=float)
    return np.real(_z(p) ** 1.5)


def curved_model(p, a2: float = 0.15, a3: float = 0.1):
    """Model solution bent along ``x_n = a2 x_1^2 + a3 x_1^3`` (``n = 2``)."""
    p = np.asarray(p, dtype=float)
    x1 = p[..., 0]
    return np.real((p[..., -2] - a2 * x1**2 - a3 * x1**3 + 1j * p[..., -1]) ** 1.5)


FIELDS = {
    "model": model_solution,
    "xi": lambda p: perp_weights(np.asarray(p, dtype=float))[1],
    "xn": lambda p: np.asarray(p, dtype=float)[..., -2],
    "rho": lambda p: perp_weights(np.asarray(p, dtype=float))[0],
    "one": lambda p: np.ones(np.shape(p)[:-1]),
    "zero": lambda p: np.zeros(np.shape(p)[:-1]),
    "harmonic_linear": lambda p: np.asarray(p, dtype=float)[..., -2] - 0.5 * perp_weights(np.asarray(p, dtype=float))[0],
    "campanato_model": lambda p: (np.asarray(p, dtype=float)[..., -2]
                                  - 0.5 * perp_weights(np.asarray(p, dtype=float))[0]
                                  + perp_weights(np.asarray(p, dtype=float))[0] ** 1.25),
    "curved": curved_model,
}


def get_field(name: str, shift=None):
    """Look up a named field, optionally translated: ``f(x - shift)``."""
    if name not in FIELDS:
        raise KeyError(f"unknown field {name!r}; known: {sorted(FIELDS)}")
    f = FIELDS[name]
    if shift is None:
        return f
    s = np.asarray(shift, dtype=float)
    return lambda p: f(np.asarray(p, dtype=float) - s)


def random_bump(p, seed: int):
    """Seeded field supported in ``B_R``, ``R`` in ``[0.3, 1]`` (``n = 1``).

    A radial bump ``(1 - (r/R)^2)_+^2`` times a random combination of the
    half-angle modes ``cos(k theta/2)``, ``sin(k theta/2)``, ``k <= 5``, so
    the field may jump across the slit.
    """
    rng = np.random.default_rng(seed)
    p = np.asarray(p, dtype=float)
    x, y = p[..., -2], p[..., -1]
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    R = rng.uniform(0.3, 1.0)
    rad = np.clip(1 - (r / R) ** 2, 0, None) ** 2
    ang = sum(rng.normal() * np.cos(k * th / 2) + rng.normal() * np.sin(k * th / 2) for k in range(6))
    return rad * ang * (1 + rng.normal() * r)
