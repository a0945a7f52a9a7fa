"""Quadrature realization of L^2(0, 1).

Functions on (0, 1) are stored as their values at the quadrature nodes.  The
inner product is the weighted sum ``sum(w_i f_i g_i)``, so every norm in the
package is an approximation of the L^2 norm, never the raw Euclidean norm of
the value vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .io import read_csv, write_csv

__all__ = [
    "Grid",
    "GridFunction",
    "make_uniform_grid",
    "scalar_grid",
    "inner",
    "norm",
    "sample",
    "constant",
    "zeros",
    "heaviside",
    "random_function",
    "write_grid_function",
    "read_grid_function",
]

_WEIGHT_SUM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes and positive weights on (0, 1).

    Parameters
    ----------
    nodes : array_like
        Strictly increasing nodes inside the open interval (0, 1).
    weights : array_like
        Positive weights summing to one.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size < 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal positive length")
        if np.any(nodes <= 0.0) or np.any(nodes >= 1.0):
            raise ValueError("nodes must lie in the open interval (0, 1)")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    @property
    def h(self) -> float:
        """Cell width of a uniform grid."""
        if not self.is_uniform:
            raise ValueError("cell width is defined for uniform grids only")
        return float(self.weights[0])

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.n == other.n
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        return f"Grid(n={self.n})"


def make_uniform_grid(n: int) -> Grid:
    """Composite midpoint rule with ``n`` cells: nodes ``(i - 1/2)/n``, weights ``1/n``."""
    if int(n) != n or n < 2:
        raise ValueError(f"need an integer n >= 2, got {n!r}")
    n = int(n)
    return Grid((np.arange(1, n + 1) - 0.5) / n, np.full(n, 1.0 / n))


def scalar_grid() -> Grid:
    """One node with unit weight: turns the real line into a GridFunction space."""
    return Grid(np.array([0.5]), np.array([1.0]))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the nodes of ``grid``.

    Supports ``+``, ``-``, negation and multiplication/division by scalars.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values).reshape(-1)
        if values.size != self.grid.n:
            raise ValueError(f"expected {self.grid.n} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", values)

    def _other(self, other) -> np.ndarray:
        if isinstance(other, GridFunction):
            _check_grid(self, other)
            return other.values
        return NotImplemented

    def __add__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return GridFunction(self.grid, self.values + v)

    def __sub__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return GridFunction(self.grid, self.values - v)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            return NotImplemented
        return GridFunction(self.grid, float(c) * self.values)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return GridFunction(self.grid, self.values / float(c))

    def __len__(self):
        return self.grid.n

    def __repr__(self):
        return f"GridFunction(n={self.grid.n}, norm={norm(self):.6g})"


def _check_grid(f: GridFunction, g: GridFunction) -> None:
    if not f.grid.same_as(g.grid):
        raise ValueError(f"grid mismatch: {f.grid!r} vs {g.grid!r}")


def inner(f: GridFunction, g: GridFunction) -> float:
    """Weighted inner product ``sum(w_i f_i g_i)``."""
    _check_grid(f, g)
    return float(np.dot(f.grid.weights * f.values, g.values))


def norm(f: GridFunction) -> float:
    return float(np.sqrt(np.dot(f.grid.weights, f.values**2)))


def sample(grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    """Evaluate a vectorized function at the nodes."""
    return GridFunction(grid, np.broadcast_to(func(grid.nodes), (grid.n,)))


def constant(grid: Grid, c: float = 1.0) -> GridFunction:
    return GridFunction(grid, np.full(grid.n, float(c)))


def zeros(grid: Grid) -> GridFunction:
    return constant(grid, 0.0)


def heaviside(grid: Grid, jump: float = 0.5) -> GridFunction:
    """Indicator of ``[jump, 1)``; equals 1 at nodes ``t >= jump``."""
    return GridFunction(grid, (grid.nodes >= jump).astype(float))


def random_function(grid: Grid, rng: np.random.Generator | int | None = None) -> GridFunction:
    """Standard Gaussian values, one draw per node."""
    rng = np.random.default_rng(rng)
    return GridFunction(grid, rng.standard_normal(grid.n))


def write_grid_function(f: GridFunction, path: str | Path) -> Path:
    """CSV with columns ``t,value``, full double precision."""
    return write_csv(path, ("t", "value"), zip(f.grid.nodes, f.values))


def read_grid_function(path: str | Path, grid: Grid | None = None) -> GridFunction:
    """Inverse of :func:`write_grid_function`.

    Without ``grid`` the nodes must come from a uniform midpoint grid.
    """
    header, data = read_csv(path)
    if header != ["t", "value"]:
        raise ValueError(f"unexpected CSV header {header}")
    if grid is None:
        grid = make_uniform_grid(data.shape[0])
    if not np.allclose(grid.nodes, data[:, 0], rtol=0, atol=1e-15):
        raise ValueError("CSV nodes do not match the grid")
    return GridFunction(grid, data[:, 1])
