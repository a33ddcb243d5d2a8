"""Slit geometry in one namespace: weights, coordinates, cones, coefficients and grids."""
from .coefficients import *  # noqa: F401,F403
from .coefficients import __all__ as _coef_all
from .geometry import *  # noqa: F401,F403
from .geometry import __all__ as _geom_all
from .grid import *  # noqa: F401,F403
from .grid import __all__ as _grid_all

__all__ = list(_geom_all) + list(_coef_all) + list(_grid_all)
