"""Tensor grids over slit domains, sampled fields and quadrature.

Two coordinate systems are supported:

``physical``
    axes ``(x^T, x_n, x_{n+1})``.  Cell-centred grids put the slit on cell
    faces; vertex grids put it on a node row.  ``half=True`` stores only
    ``x_{n+1} >= 0`` of an ``x_{n+1}``-even field.
``sqrt``
    axes ``(x^T, xi, eta)`` with ``xi >= 0``, always vertex-centred.  The slit
    becomes the flat face ``{xi = 0}`` and ``dx = 4 rho dxi deta dx^T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from .geometry import inverse_map, perp_weights, sqrt_map

__all__ = ["SlitGrid", "FieldSample", "Quadrature", "fd_gradient", "weight_function", "ball_region"]

_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


def weight_function(kind, p):
    """Evaluate one of the named weights at physical points ``p``."""
    if kind is None or kind == "one":
        return np.ones(p.shape[:-1])
    rho, xi, _ = perp_weights(p)
    if kind == "inv_rho":
        return 1.0 / rho
    if kind == "xi2":
        return xi**2
    if kind == "rho_xi4":
        return rho * xi**4
    raise ValueError(f"unknown weight {kind!r}")


@dataclass(frozen=True)
class SlitGrid:
    n: int
    lower: tuple
    upper: tuple
    cells: tuple
    coords: str = "physical"
    centering: str = "vertex"
    half: bool = False

    def __post_init__(self):
        d = self.n + 1
        for name in ("lower", "upper", "cells"):
            val = tuple(getattr(self, name))
            if len(val) != d:
                raise ValueError(f"{name} must have length n + 1 = {d}")
            object.__setattr__(self, name, val)
        if self.coords not in ("physical", "sqrt"):
            raise ValueError("coords must be 'physical' or 'sqrt'")
        if self.centering not in ("vertex", "cell"):
            raise ValueError("centering must be 'vertex' or 'cell'")
        if any(c < 1 for c in self.cells) or any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("empty grid box")
        if self.coords == "sqrt":
            if self.centering != "vertex" or self.lower[-2] != 0.0 or self.half:
                raise ValueError("sqrt grids are vertex-centred with xi starting at 0")
        else:
            # the thin plane must be a node row (vertex) or a face row (cell)
            t = (0.0 - self.lower[-1]) / self.spacing[-1]
            if self.half and self.lower[-1] != 0.0:
                raise ValueError("half grids start at x_{n+1} = 0")
            if self.half and self.centering != "vertex":
                raise ValueError("half grids are vertex-centred")
            if not self.half and (abs(t - round(t)) > 1e-9 or not 0 <= t <= self.cells[-1]):
                raise ValueError("x_{n+1} = 0 must lie on a grid line")

    # construction helpers -------------------------------------------------
    @classmethod
    def box(cls, n: int, h: float, radius: float = 1.0, coords: str = "physical",
            centering: str = "vertex", half: bool = False) -> "SlitGrid":
        """Smallest grid of spacing ``h`` whose image covers ``B_radius``."""
        d = n + 1
        if coords == "sqrt":
            s = np.sqrt(radius)
            lower = [-radius] * (d - 2) + [0.0, -s]
            upper = [radius] * (d - 2) + [s, s]
        else:
            lower = [-radius] * d
            upper = [radius] * d
            if half:
                lower[-1] = 0.0
        cells = [max(1, int(round((u - l) / h))) for l, u in zip(lower, upper)]
        return cls(n, tuple(lower), tuple(upper), tuple(cells), coords, centering, half)

    # basic geometry -------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.n + 1

    @cached_property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.cells)

    @cached_property
    def axes(self) -> list:
        out = []
        for l, h, c in zip(self.lower, self.spacing, self.cells):
            if self.centering == "vertex":
                out.append(l + h * np.arange(c + 1))
            else:
                out.append(l + h * (np.arange(c) + 0.5))
        return out

    @property
    def node_shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.node_shape))

    @cached_property
    def nodes(self) -> np.ndarray:
        """Grid-coordinate array of shape ``(*node_shape, n + 1)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def to_physical(self, q: np.ndarray) -> np.ndarray:
        return inverse_map(q) if self.coords == "sqrt" else np.asarray(q, dtype=float)

    def to_grid(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.coords == "sqrt":
            return sqrt_map(p)
        if self.half:
            p = p.copy()
            p[..., -1] = np.abs(p[..., -1])
        return p

    @cached_property
    def points(self) -> np.ndarray:
        return self.to_physical(self.nodes)

    @cached_property
    def rho(self) -> np.ndarray:
        return perp_weights(self.points)[0]

    @cached_property
    def xi(self) -> np.ndarray:
        if self.coords == "sqrt":
            return self.nodes[..., -2]
        return perp_weights(self.points)[1]

    def ball_mask(self, radius: float, center=None) -> np.ndarray:
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        return np.linalg.norm(self.points - c, axis=-1) <= radius

    @property
    def slit_mask(self) -> np.ndarray:
        """Nodes lying on the slit (or its image ``{xi = 0}``)."""
        if self.coords == "sqrt":
            return self.nodes[..., -2] == 0.0
        p = self.points
        return (p[..., -2] < 0) & (p[..., -1] == 0)

    @property
    def boundary_mask(self) -> np.ndarray:
        """Nodes on the outer box faces (vertex grids)."""
        m = np.zeros(self.node_shape, dtype=bool)
        for k in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[k] = 0
            m[tuple(sl)] = True
            sl[k] = -1
            m[tuple(sl)] = True
        return m

    def sample(self, fn, parity: str | None = None) -> "FieldSample":
        return FieldSample(self, np.asarray(fn(self.points), dtype=float), parity)

    def refine(self, factor: int = 2) -> "SlitGrid":
        return SlitGrid(self.n, self.lower, self.upper, tuple(c * factor for c in self.cells),
                        self.coords, self.centering, self.half)

    def crop(self, lo, hi) -> tuple["SlitGrid", tuple]:
        """Sub-grid of vertex nodes inside the grid-coordinate box ``[lo, hi]``."""
        if self.centering != "vertex":
            raise ValueError("crop needs a vertex grid")
        idx, lower, upper, cells = [], [], [], []
        for a, l, u, h in zip(self.axes, lo, hi, self.spacing):
            i0 = int(np.clip(np.floor((l - a[0]) / h + 1e-9), 0, len(a) - 2))
            i1 = int(np.clip(np.ceil((u - a[0]) / h - 1e-9), i0 + 1, len(a) - 1))
            idx.append(slice(i0, i1 + 1))
            lower.append(a[i0])
            upper.append(a[i1])
            cells.append(i1 - i0)
        sub = SlitGrid(self.n, tuple(lower), tuple(upper), tuple(cells), self.coords,
                       self.centering, self.half and lower[-1] == 0.0)
        return sub, tuple(idx)


@dataclass
class FieldSample:
    """Scalar values on the nodes of a :class:`SlitGrid`."""

    grid: SlitGrid
    values: np.ndarray
    parity: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.node_shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.node_shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.parity not in (None, "even", "odd"):
            raise ValueError("parity must be 'even', 'odd' or None")
        if self.grid.half and self.parity is None:
            self.parity = "even"

    def __call__(self, p) -> np.ndarray:
        """Multilinear interpolation at physical points."""
        p = np.asarray(p, dtype=float)
        q = self.grid.to_grid(p)
        vals = self._interp(q.reshape(-1, self.grid.dim)).reshape(p.shape[:-1])
        if self.grid.half and self.parity == "odd":
            vals = vals * np.where(np.signbit(p[..., -1]), -1.0, 1.0)
        return vals

    @cached_property
    def _interp(self):
        return RegularGridInterpolator(tuple(self.grid.axes), self.values, bounds_error=False,
                                       fill_value=None)

    def with_values(self, values, parity=None) -> "FieldSample":
        return FieldSample(self.grid, values, parity if parity is not None else self.parity)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, c):
        return self.with_values(self.values * _vals(c))

    __rmul__ = __mul__

    def check_parity(self, tol: float = 1e-12) -> bool:
        """Mirrored-node test of the declared parity (full physical grids only)."""
        if self.parity is None or self.grid.half or self.grid.coords != "physical":
            return True
        mirrored = self.values[..., ::-1]
        sign = 1.0 if self.parity == "even" else -1.0
        off = ~(self.grid.slit_mask | self.grid.slit_mask[..., ::-1])
        return bool(np.all(np.abs(self.values - sign * mirrored)[off] <= tol * (1 + np.abs(self.values[off]))))


def _vals(x):
    return x.values if isinstance(x, FieldSample) else x


def fd_gradient(grid: SlitGrid, u: np.ndarray) -> np.ndarray:
    """Centred differences on a physical grid that never difference across the slit."""
    if grid.coords != "physical":
        raise ValueError("fd_gradient works in physical coordinates")
    u = np.asarray(u, dtype=float)
    d = grid.dim
    out = np.empty(u.shape + (d,))
    for k in range(d):
        out[..., k] = np.gradient(u, grid.spacing[k], axis=k, edge_order=1)
    # rows on either side of the slit for x_n < 0
    y = grid.axes[-1]
    h = grid.spacing[-1]
    neg = grid.axes[-2] < 0
    if grid.centering == "cell":
        above = np.where(np.isclose(y, 0.5 * h))[0]
        below = np.where(np.isclose(y, -0.5 * h))[0]
        if above.size and above[0] + 1 < len(y):
            j = above[0]
            out[..., neg, j, -1] = (u[..., neg, j + 1] - u[..., neg, j]) / h
        if below.size and below[0] >= 1:
            j = below[0]
            out[..., neg, j, -1] = (u[..., neg, j] - u[..., neg, j - 1]) / h
    else:
        on = np.where(np.isclose(y, 0.0))[0]
        if on.size:
            j = on[0]
            # slit nodes take the one-sided upper-lip derivative
            if j + 1 < len(y):
                out[..., neg, j, -1] = (u[..., neg, j + 1] - u[..., neg, j]) / h
    return out


class Quadrature:
    """Quadrature points, weights and field evaluation on a grid.

    Vertex grids use two-point Gauss rules per cell on the multilinear
    interpolant; on physical grids the cells touching the edge ``rho = 0`` get
    a composite ``4 x 4`` rule in the ``x^perp`` plane.  Cell-centred grids use
    the midpoint rule with centred differences; there the singular weight
    ``1/rho`` is replaced by its ``4 x 4`` sub-cell average in tip cells.

    Values are returned as ``(main, extra)`` pairs: ``main`` has shape
    ``(Q, *cells)`` and ``extra`` is a flat array for the refined tip points.
    """

    def __init__(self, grid: SlitGrid, refine_tip: bool = True):
        self.grid = grid
        d = grid.dim
        h = grid.spacing
        if grid.centering == "cell":
            self.points = grid.points[None]
            self.weights = np.full((1,) + grid.node_shape, float(np.prod(h)))
            self._tip = self._cell_tip_mask() if refine_tip else None
            self.xpoints = np.zeros((0, d))
            self.xweights = np.zeros(0)
            return
        self.corners = list(product((0, 1), repeat=d))
        self.gauss = list(product(range(2), repeat=d))
        cell_lo = np.stack(np.meshgrid(*[a[:-1] for a in grid.axes], indexing="ij"), axis=-1)
        base_w = float(np.prod(h)) / 2**d
        pts, wts = [], []
        for g in self.gauss:
            t = np.array([_GAUSS[i] for i in g])
            q = cell_lo + t * h
            p = grid.to_physical(q)
            w = np.full(q.shape[:-1], base_w)
            if grid.coords == "sqrt":
                w = w * 4.0 * (q[..., -2] ** 2 + q[..., -1] ** 2)
            pts.append(p)
            wts.append(w)
        self.points = np.stack(pts)
        self.weights = np.stack(wts)
        self._qgrid = [cell_lo + np.array([_GAUSS[i] for i in g]) * h for g in self.gauss]
        self._xI = None
        self.xpoints = np.zeros((0, d))
        self.xweights = np.zeros(0)
        if refine_tip and grid.coords == "physical":
            self._build_tip()

    # ---------------------------------------------------------------- cell grid
    def _cell_tip_mask(self):
        p = self.grid.points
        h = self.grid.spacing
        return (np.abs(p[..., -2]) < h[-2]) & (np.abs(p[..., -1]) < h[-1])

    # -------------------------------------------------------------- vertex grid
    def _build_tip(self):
        g = self.grid
        d = g.dim
        h = g.spacing
        xn, yn = g.axes[-2], g.axes[-1]
        ci = [i for i in range(len(xn) - 1) if xn[i] <= 0 <= xn[i + 1] and (xn[i] == 0 or xn[i + 1] == 0)]
        cj = [j for j in range(len(yn) - 1) if yn[j] <= 0 <= yn[j + 1] and (yn[j] == 0 or yn[j + 1] == 0)]
        if not ci or not cj:
            return
        sub = 4
        loc1 = (np.arange(sub)[:, None] + _GAUSS[None, :]).ravel() / sub  # 8 points in (0,1)
        rows, cols, vals, gvals = [], [], [], [[] for _ in range(d)]
        xp, xw = [], []
        tshape = [c for c in g.cells[:-2]]
        node_idx = np.arange(g.size).reshape(g.node_shape)
        for i in ci:
            for j in cj:
                for tidx in np.ndindex(*tshape) if tshape else [()]:
                    cell = tuple(tidx) + (i, j)
                    # zero the coarse Gauss weights of this cell
                    self.weights[(slice(None),) + cell] = 0.0
                    lo = np.array([g.axes[k][cell[k]] for k in range(d)])
                    tang = [_GAUSS] * (d - 2)
                    for tt in product(*tang, loc1, loc1):
                        t = np.array(tt)
                        w = float(np.prod(h)) / 2 ** (d - 2) / (2 * sub) ** 2
                        xp.append(lo + t * h)
                        xw.append(w)
                        r = len(xp) - 1
                        for c in self.corners:
                            N = np.prod([t[k] if c[k] else 1 - t[k] for k in range(d)])
                            node = node_idx[tuple(cell[k] + c[k] for k in range(d))]
                            rows.append(r)
                            cols.append(node)
                            vals.append(N)
                            for k in range(d):
                                dN = np.prod([(t[m] if c[m] else 1 - t[m]) if m != k else (1.0 if c[k] else -1.0)
                                              for m in range(d)]) / h[k]
                                gvals[k].append(dN)
        E = len(xp)
        self.xpoints = g.to_physical(np.array(xp))
        self.xweights = np.array(xw)
        shape = (E, g.size)
        self._xI = sparse.csr_matrix((vals, (rows, cols)), shape=shape)
        self._xG = [sparse.csr_matrix((gv, (rows, cols)), shape=shape) for gv in gvals]

    def _shape_at(self, gi: int):
        t = np.array([_GAUSS[i] for i in self.gauss[gi]])
        d = self.grid.dim
        N = []
        dN = []
        for c in self.corners:
            N.append(np.prod([t[k] if c[k] else 1 - t[k] for k in range(d)]))
            dN.append([np.prod([(t[m] if c[m] else 1 - t[m]) if m != k else (1.0 if c[k] else -1.0)
                                for m in range(d)]) / self.grid.spacing[k] for k in range(d)])
        return np.array(N), np.array(dN)

    def _corner(self, u, c):
        return u[tuple(slice(ck, None if ck else -1) for ck in c)]

    # ------------------------------------------------------------------ API
    def values(self, u):
        u = np.asarray(u, dtype=float)
        if self.grid.centering == "cell":
            return u[None], np.zeros(0)
        main = np.zeros(self.weights.shape)
        for gi in range(len(self.gauss)):
            N, _ = self._shape_at(gi)
            for ci, c in enumerate(self.corners):
                main[gi] += N[ci] * self._corner(u, c)
        extra = self._xI @ u.ravel() if self._xI is not None else np.zeros(0)
        return main, extra

    def grid_gradients(self, u):
        """Gradients in grid coordinates: ``(Q, *cells, d)`` and ``(E, d)``."""
        u = np.asarray(u, dtype=float)
        d = self.grid.dim
        if self.grid.centering == "cell":
            return fd_gradient(self.grid, u)[None], np.zeros((0, d))
        main = np.zeros(self.weights.shape + (d,))
        for gi in range(len(self.gauss)):
            _, dN = self._shape_at(gi)
            for ci, c in enumerate(self.corners):
                uc = self._corner(u, c)
                for k in range(d):
                    main[gi, ..., k] += dN[ci, k] * uc
        if self._xI is not None:
            extra = np.stack([G @ u.ravel() for G in self._xG], axis=-1)
        else:
            extra = np.zeros((0, d))
        return main, extra

    def gradients(self, u):
        """Physical gradients at the quadrature points."""
        gm, ge = self.grid_gradients(u)
        if self.grid.coords == "sqrt":
            gm = self.to_physical_gradient(gm, np.stack(self._qgrid))
        return gm, ge

    @staticmethod
    def to_physical_gradient(g, q):
        """``grad_x = (I, J / (4 rho)) grad_y`` with ``J = 2 [[xi, -eta], [eta, xi]]``."""
        xi, eta = q[..., -2], q[..., -1]
        rho = xi**2 + eta**2
        out = g.copy()
        a, b = g[..., -2], g[..., -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[..., -2] = (xi * a - eta * b) / (2 * rho)
            out[..., -1] = (eta * a + xi * b) / (2 * rho)
        return out

    def weighted(self, kind=None):
        """Quadrature weights times the named weight function."""
        if self.grid.centering == "cell":
            w = self.weights * weight_function(kind, self.points)
            if kind == "inv_rho" and self._tip is not None:
                w = w.copy()
                w[0][self._tip] = self.weights[0][self._tip] * self._tip_average_inv_rho()
            return w, np.zeros(0)
        return (self.weights * weight_function(kind, self.points),
                self.xweights * weight_function(kind, self.xpoints) if len(self.xweights) else np.zeros(0))

    def _tip_average_inv_rho(self):
        g = self.grid
        h = g.spacing
        p = g.points[self._tip]
        sub = (np.arange(4) + 0.5) / 4 - 0.5
        acc = np.zeros(len(p))
        for a in sub:
            for b in sub:
                acc += 1.0 / np.hypot(p[:, -2] + a * h[-2], p[:, -1] + b * h[-1])
        return acc / 16.0

    def mask(self, region):
        """Region indicator at the quadrature points.  ``region`` maps points to bools."""
        if region is None:
            return np.ones(self.weights.shape, dtype=bool), np.ones(len(self.xweights), dtype=bool)
        return region(self.points), (region(self.xpoints) if len(self.xweights) else np.zeros(0, bool))

    def integrate(self, main, extra, kind=None, region=None) -> float:
        wm, we = self.weighted(kind)
        mm, me = self.mask(region)
        total = float(np.sum(np.where(mm, wm * main, 0.0), dtype=float))
        if len(we):
            total += float(np.sum(np.where(me, we * extra, 0.0)))
        if self.grid.half:
            total *= 2.0
        return total


def ball_region(radius: float, center=None):
    def region(p):
        c = np.zeros(p.shape[-1]) if center is None else np.asarray(center, dtype=float)
        return np.linalg.norm(p - c, axis=-1) <= radius

    return region
