"""Uniform cell grids on the unit interval / unit square and discrete measures on them.

Measures are stored as per-cell probability masses.  Probability density
values are derived on demand as ``mass / cell_area``.  Two-dimensional
masses are flattened row-major with the x index fastest, i.e. cell
``(i, j)`` lives at flat index ``j * nx + i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .errors import GridMismatch, InvalidDensity, InvalidGrid

MASS_TOL = 1e-12


def _centers(n: int) -> np.ndarray:
    return (np.arange(n, dtype=np.float64) + 0.5) / n


@dataclass(frozen=True)
class Grid1D:
    """N equal cells ``[(i-1)/N, i/N)`` covering [0, 1]."""

    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise InvalidGrid(f"n_cells must be an integer >= 2, got {self.n_cells!r}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def ndim(self) -> int:
        return 1

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def size(self) -> int:
        return self.n_cells

    @property
    def cell_area(self) -> float:
        return self.dx

    @cached_property
    def centers(self) -> np.ndarray:
        c = _centers(self.n_cells)
        c.flags.writeable = False
        return c

    @property
    def x(self) -> np.ndarray:
        """x coordinate of every cell center, in storage order."""
        return self.centers

    def edges(self) -> np.ndarray:
        return np.arange(self.n_cells + 1, dtype=np.float64) / self.n_cells


@dataclass(frozen=True)
class Grid2D:
    """``nx * nz`` product cells on the unit square (x fastest in storage)."""

    nx: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "nz"):
            v = getattr(self, name)
            if int(v) != v or v < 2:
                raise InvalidGrid(f"{name} must be an integer >= 2, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def ndim(self) -> int:
        return 2

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dz(self) -> float:
        return 1.0 / self.nz

    @property
    def size(self) -> int:
        return self.nx * self.nz

    @property
    def cell_area(self) -> float:
        return self.dx * self.dz

    @cached_property
    def centers_x(self) -> np.ndarray:
        c = _centers(self.nx)
        c.flags.writeable = False
        return c

    @cached_property
    def centers_z(self) -> np.ndarray:
        c = _centers(self.nz)
        c.flags.writeable = False
        return c

    @cached_property
    def x(self) -> np.ndarray:
        v = np.tile(self.centers_x, self.nz)
        v.flags.writeable = False
        return v

    @cached_property
    def z(self) -> np.ndarray:
        v = np.repeat(self.centers_z, self.nx)
        v.flags.writeable = False
        return v

    def as_matrix(self, flat) -> np.ndarray:
        """View flat per-cell values as an ``(nz, nx)`` array, ``[j, i]``."""
        return np.asarray(flat).reshape(self.nz, self.nx)


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True, eq=False)
class Density:
    """Per-cell probability masses of agent actions on a grid."""

    masses: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        m = np.array(self.masses, dtype=np.float64)
        if m.ndim != 1 or m.size != self.grid.size:
            raise InvalidDensity(f"expected {self.grid.size} masses, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidDensity("masses must be finite")
        if np.any(m < 0.0):
            i = int(np.argmin(m))
            raise InvalidDensity(f"negative mass {m[i]:.3e} in cell {i}")
        total = m.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDensity(f"masses sum to {total!r}, not 1")
        m.flags.writeable = False
        object.__setattr__(self, "masses", m)

    @property
    def pdf(self) -> np.ndarray:
        return self.masses / self.grid.cell_area

    def __eq__(self, other):
        if not isinstance(other, Density):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.masses, other.masses)

    __hash__ = None


def uniform_density(grid: Grid) -> Density:
    return Density(np.full(grid.size, 1.0 / grid.size), grid)


def density_from_pdf(grid: Grid, pdf_values) -> Density:
    """Masses proportional to ``pdf_value * cell_area``, renormalized to one."""
    p = np.asarray(pdf_values, dtype=np.float64).ravel()
    if p.size != grid.size:
        raise InvalidDensity(f"expected {grid.size} pdf values, got {p.size}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise InvalidDensity("pdf values must be finite and nonnegative")
    w = p * grid.cell_area
    total = w.sum()
    if total <= 0.0:
        raise InvalidDensity("pdf values are all zero")
    return Density(w / total, grid)


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre01(order: int):
    if order not in _GL_CACHE:
        t, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (0.5 * (t + 1.0), 0.5 * w)
    return _GL_CACHE[order]


def density_from_function(grid: Grid, fn: Callable, order: int = 8) -> Density:
    """Discretize an (unnormalized) pdf by integrating it over every cell.

    ``fn`` takes x (1D) or x, z (2D) arrays.  Gauss-Legendre with ``order``
    nodes per axis is exact for polynomials of degree ``2*order - 1``.
    """
    t, w = _gauss_legendre01(order)
    if grid.ndim == 1:
        xs = grid.edges()[:-1, None] + grid.dx * t[None, :]
        vals = np.asarray(fn(xs), dtype=np.float64) * np.ones_like(xs)
        cell = (vals * w[None, :]).sum(axis=1) * grid.dx
    else:
        xs = (np.arange(grid.nx)[:, None] + t[None, :]) * grid.dx  # (nx, q)
        zs = (np.arange(grid.nz)[:, None] + t[None, :]) * grid.dz  # (nz, q)
        X = xs[None, :, None, :]
        Z = zs[:, None, :, None]
        vals = np.asarray(fn(X, Z), dtype=np.float64) * np.ones((grid.nz, grid.nx, order, order))
        cell = np.einsum("jiab,a,b->ji", vals, w, w).ravel() * grid.cell_area
    if not np.all(np.isfinite(cell)) or np.any(cell < -1e-300):
        raise InvalidDensity("pdf function must be finite and nonnegative")
    cell = np.maximum(cell, 0.0)
    total = cell.sum()
    if total <= 0.0:
        raise InvalidDensity("pdf function integrates to zero")
    return Density(cell / total, grid)


def mean_action(density: Density) -> float:
    """Mean action; on a 2D grid this is the mean along the x axis."""
    return float(np.dot(density.grid.x, density.masses))


def sup_pdf_diff(a: Density, b: Density) -> float:
    if a.grid != b.grid:
        raise GridMismatch(f"{a.grid!r} vs {b.grid!r}")
    return float(np.max(np.abs(a.masses - b.masses))) / a.grid.cell_area
