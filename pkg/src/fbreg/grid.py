"""Uniform square grids, grid functions and the 9-point discrete Hessian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .operators import SymMat


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Grid2:
    """Nodes of the square [-L, L]^2 with ``n_cells`` cells per side.

    Arrays over the grid are indexed ``[i, j]`` with x1 = -L + i h, x2 = -L + j h.
    """

    half_width: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 8 or self.n_cells % 2:
            raise ValueError(f"n_cells must be even and >= 8, got {self.n_cells}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def shape(self) -> tuple:
        return (self.n_nodes, self.n_nodes)

    @property
    def axis(self) -> np.ndarray:
        # symmetric about 0 so the origin is an exact node
        k = np.arange(self.n_nodes) - self.n_cells // 2
        return k * self.h

    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def nearest_index(self, point) -> tuple:
        i, j = (int(np.rint((c + self.half_width) / self.h)) for c in point)
        if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
            raise ValueError(f"point {tuple(point)} lies outside the grid")
        return i, j

    def node(self, i: int, j: int) -> np.ndarray:
        return np.array([self.axis[i], self.axis[j]])

    def ball_mask(self, center, r: float) -> np.ndarray:
        x, y = self.mesh()
        # relative slack keeps nodes exactly on the circle
        return (x - center[0]) ** 2 + (y - center[1]) ** 2 <= (r * (1 + 1e-12)) ** 2

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "n_cells": self.n_cells}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid2":
        return cls(float(d["half_width"]), int(d["n_cells"]))

    @classmethod
    def with_spacing(cls, half_width: float, h: float) -> "Grid2":
        return cls(half_width, int(round(2 * half_width / h)))


@dataclass
class ScalarField:
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise GridMismatch(f"values have shape {self.values.shape}, grid has {self.grid.shape}")
        if self.values.dtype != bool and not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")

    @classmethod
    def from_function(cls, grid: Grid2, f) -> "ScalarField":
        x, y = grid.mesh()
        return cls(grid, np.asarray(f(x, y), dtype=float) * np.ones(grid.shape))

    def at(self, point) -> float:
        return float(self.values[self.grid.nearest_index(point)])

    def interpolator(self):
        ax = self.grid.axis
        return RegularGridInterpolator((ax, ax), self.values.astype(float), method="linear")

    def interpolate(self, points) -> np.ndarray:
        """Bilinear interpolation; points are clipped to the square."""
        pts = np.clip(np.atleast_2d(points), -self.grid.half_width, self.grid.half_width)
        return self.interpolator()(pts)


def _check_interior(grid: Grid2, i: int, j: int):
    if not (1 <= i <= grid.n_cells - 1 and 1 <= j <= grid.n_cells - 1):
        raise ValueError(f"node ({i}, {j}) does not have all 8 neighbors in the grid")


def discrete_hessian(u: ScalarField, node) -> SymMat:
    """Central-difference Hessian at grid index ``node = (i, j)``; exact on quadratics."""
    i, j = node
    _check_interior(u.grid, i, j)
    v, h2 = u.values, u.grid.h**2
    a11 = (v[i + 1, j] + v[i - 1, j] - 2 * v[i, j]) / h2
    a22 = (v[i, j + 1] + v[i, j - 1] - 2 * v[i, j]) / h2
    a12 = (v[i + 1, j + 1] + v[i - 1, j - 1] - v[i + 1, j - 1] - v[i - 1, j + 1]) / (4 * h2)
    return SymMat(2, float(a11), float(a12), float(a22))


def hessian_arrays(u: ScalarField):
    """(a11, a12, a22) over all nodes; NaN on the outer ring."""
    v, h2 = u.values.astype(float), u.grid.h**2
    out = [np.full(v.shape, np.nan) for _ in range(3)]
    c = v[1:-1, 1:-1]
    out[0][1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] - 2 * c) / h2
    out[2][1:-1, 1:-1] = (v[1:-1, 2:] + v[1:-1, :-2] - 2 * c) / h2
    out[1][1:-1, 1:-1] = (v[2:, 2:] + v[:-2, :-2] - v[2:, :-2] - v[:-2, 2:]) / (4 * h2)
    return tuple(out)


def gradient_arrays(u: ScalarField):
    """Central-difference gradient; NaN on the outer ring."""
    v, h = u.values.astype(float), u.grid.h
    g1 = np.full(v.shape, np.nan)
    g2 = np.full(v.shape, np.nan)
    g1[1:-1, 1:-1] = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    g2[1:-1, 1:-1] = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    return g1, g2


def interior_mask(grid: Grid2, layers: int = 1) -> np.ndarray:
    m = np.zeros(grid.shape, dtype=bool)
    m[layers:-layers, layers:-layers] = True
    return m
