"""scikit-learn style wrappers around the fitting and solving routines.

``LinearPolyRegressor`` is a plain array estimator.  The others take grid
fields or problem objects as ``X`` and expose ``fit`` / ``predict`` /
``transform`` with the usual fitted-attribute conventions.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .grid import FieldSample, SlitGrid
from .poly import LinearPoly, poly_basis

__all__ = ["LinearPolyRegressor", "CampanatoEstimator", "HolderAverageEstimator",
           "DegenerateSolver", "SignoriniSolver"]


def _check_field(X) -> FieldSample:
    if not isinstance(X, FieldSample):
        raise TypeError(f"expected a FieldSample, got {type(X).__name__}")
    return X


def _check_points(X, dim):
    X = check_array(X, dtype=float)
    if X.shape[1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got {X.shape[1]}")
    return X


class LinearPolyRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``c0 + sum c_i (x_i - center_i) + c_rho rho_kappa`` to scattered data.

    Rows of ``X`` are physical points ``(x_1, ..., x_{n+1})``.  With
    ``weighted=True`` each sample is weighted by ``1/rho`` as in the
    Campanato seminorm.
    """

    def __init__(self, center=None, kappa: float = 1.0, weighted: bool = True):
        self.center = center
        self.kappa = kappa
        self.weighted = weighted

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X.shape[1] < 2:
            raise ValueError("points need at least two coordinates")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        center = None if self.center is None else np.asarray(self.center, dtype=float)
        B = poly_basis(X, center, self.kappa)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if self.weighted:
            rho = np.hypot(X[:, -2], X[:, -1])
            if np.any(rho <= 0):
                raise ValueError("weighted fits need points off the edge rho = 0")
            w = w / rho
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(B * sw[:, None], y * sw, rcond=None)
        ct = () if center is None else tuple(center)
        self.poly_ = LinearPoly.from_coef(coef, ct, self.kappa)
        self.coef_ = self.poly_.coef
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "poly_")
        X = _check_points(X, self.n_features_in_)
        return self.poly_(X)


class CampanatoEstimator(BaseEstimator):
    """Per-radius Campanato fits of a grid field at a tangential centre.

    ``fit(w)`` stores ``report_``, the best linear "polynomial" ``poly_``
    and the decay exponent ``exponent_``; ``predict(points)`` evaluates
    ``poly_``.
    """

    def __init__(self, center=(), radii=(0.4, 0.2, 0.1, 0.05), alpha: float = 0.25,
                 kappa: float = 1.0, tol: float = 0.05):
        self.center = center
        self.radii = radii
        self.alpha = alpha
        self.kappa = kappa
        self.tol = tol

    def fit(self, X, y=None):
        from .analysis import campanato_fit

        w = _check_field(X)
        self.report_ = campanato_fit(w, tuple(self.center), self.radii, self.alpha, self.kappa, self.tol)
        self.poly_ = self.report_.L
        self.exponent_ = self.report_.exponent
        self.n_features_in_ = w.grid.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "poly_")
        return self.poly_(_check_points(X, self.n_features_in_))


class HolderAverageEstimator(TransformerMixin, BaseEstimator):
    """Weighted average ``cbar`` of ``u/xi``; ``transform`` rescales a field by ``1/cbar``."""

    def __init__(self, center=(), radii=(0.4, 0.2, 0.1, 0.05), alpha: float = 0.25, tol: float = 0.05):
        self.center = center
        self.radii = radii
        self.alpha = alpha
        self.tol = tol

    def fit(self, X, y=None):
        from .analysis import holder_average_fit

        u = _check_field(X)
        self.report_ = holder_average_fit(u, tuple(self.center), self.radii, self.alpha, self.tol)
        self.cbar_ = self.report_.cbar
        return self

    def transform(self, X):
        check_is_fitted(self, "cbar_")
        u = _check_field(X)
        if not self.cbar_ > 0:
            raise ValueError("cbar is not positive; cannot normalise")
        return u.with_values(u.values / self.cbar_)


class DegenerateSolver(BaseEstimator):
    """``fit(problem)`` solves a degenerate or uniform problem on a square-root grid.

    ``predict(points)`` interpolates the solution at physical points.
    """

    def __init__(self, h: float = 1 / 64, radius: float = 1.0):
        self.h = h
        self.radius = radius

    def fit(self, X, y=None):
        from .dsolve import DegenerateProblem, UniformProblem, solve_degenerate, solve_uniform

        if not isinstance(X, (DegenerateProblem, UniformProblem)):
            raise TypeError("expected a DegenerateProblem or UniformProblem")
        grid = SlitGrid.box(X.n, self.h, self.radius, coords="sqrt")
        solve = solve_degenerate if isinstance(X, DegenerateProblem) else solve_uniform
        self.solution_ = solve(X, grid)
        self.report_ = self.solution_.meta["report"]
        self.n_features_in_ = grid.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        return self.solution_(_check_points(X, self.n_features_in_))


class SignoriniSolver(BaseEstimator):
    """``fit(problem)`` solves the thin obstacle problem on a physical half grid.

    ``predict(points)`` interpolates the even solution; ``free_boundary_``
    holds the extracted graph samples.
    """

    def __init__(self, h: float = 1 / 64, radius: float = 1.0, method: str = "active-set",
                 omega: float = 1.5):
        self.h = h
        self.radius = radius
        self.method = method
        self.omega = omega

    def fit(self, X, y=None):
        from .signorini import SignoriniProblem, solve_signorini

        if not isinstance(X, SignoriniProblem):
            raise TypeError("expected a SignoriniProblem")
        grid = SlitGrid.box(X.n, self.h, self.radius, half=True)
        self.solution_ = solve_signorini(X, grid, method=self.method, omega=self.omega)
        self.free_boundary_ = self.solution_.Gamma
        self.report_ = self.solution_.report()
        self.n_features_in_ = grid.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        X = _check_points(X, self.n_features_in_)
        # even reflection across the thin plane
        Y = X.copy()
        Y[:, -1] = np.abs(Y[:, -1])
        return self.solution_.U(Y)
