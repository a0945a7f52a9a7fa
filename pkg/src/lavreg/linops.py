"""Bounded monotone linear operators on the quadrature space.

Operators are dense matrices acting on node values.  All norms are taken in
the weighted L^2 metric: with ``W = diag(weights)`` the operator norm of a
matrix ``M`` is the spectral norm of ``W^{1/2} M W^{-1/2}``, and the adjoint
is ``W^{-1} M^T W``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .grid import Grid, GridFunction, make_uniform_grid, norm
from .io import write_csv, write_json

__all__ = [
    "LinearMonotoneOperator",
    "PosednessReport",
    "ResolventError",
    "QuadratureError",
    "Resolvent",
    "multiplication_operator",
    "identity_operator",
    "zero_operator",
    "volterra_operator",
    "cesaro_operator",
    "skew_example",
    "resolvent_solve",
    "weighted_norm",
    "operator_norm",
    "estimate_resolvent_norm",
    "resolvent_contraction_norm",
    "classify_posedness",
    "fractional_power_apply",
    "monotonicity_defect",
    "export_operator",
    "MULTIPLIERS",
]

RESIDUAL_TOL = 1e-10


class ResolventError(RuntimeError):
    """Factorization of ``A + alpha I`` failed or produced an inaccurate solve."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class QuadratureError(RuntimeError):
    """Balakrishnan quadrature did not settle under refinement."""


def _structure(m: np.ndarray) -> str:
    if np.count_nonzero(m - np.diag(np.diag(m))) == 0:
        return "diagonal"
    if not np.any(np.triu(m, 1)):
        return "lower"
    if not np.any(np.tril(m, -1)):
        return "upper"
    return "dense"


@dataclass(frozen=True, eq=False)
class LinearMonotoneOperator:
    """Dense realization ``(Af)_i = sum_j M_ij f_j`` of a monotone operator."""

    grid: Grid
    matrix: np.ndarray
    label: str = ""
    kind: str = "dense"
    structure: str = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"matrix shape {m.shape} does not match grid size {self.grid.n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "structure", _structure(m))

    @property
    def n(self) -> int:
        return self.grid.n

    def apply(self, f: GridFunction) -> GridFunction:
        if not f.grid.same_as(self.grid):
            raise ValueError("operand lives on a different grid")
        return GridFunction(self.grid, self.matrix @ f.values)

    __call__ = apply

    def adjoint(self) -> "LinearMonotoneOperator":
        w = self.grid.weights
        m = (self.matrix.T * w[None, :]) / w[:, None]
        return LinearMonotoneOperator(self.grid, m, f"adjoint({self.label})", self.kind + "-adjoint")

    def weighted_matrix(self) -> np.ndarray:
        """``W^{1/2} M W^{-1/2}``: the operator in orthonormal coordinates."""
        s = np.sqrt(self.grid.weights)
        return (self.matrix * s[:, None]) / s[None, :]

    def __repr__(self):
        return f"LinearMonotoneOperator({self.label or self.kind}, n={self.n})"


MULTIPLIERS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "t": lambda t: t,
    "t+1": lambda t: t + 1.0,
    "one": np.ones_like,
    "zero": np.zeros_like,
    "exp_sqrt": lambda t: np.exp(1.0 - 1.0 / np.sqrt(t)),
}


def multiplication_operator(grid: Grid, multiplier, label: str | None = None) -> LinearMonotoneOperator:
    """Diagonal operator ``(Mx)(t) = m(t) x(t)``.

    Parameters
    ----------
    multiplier : callable or str
        Vectorized function on (0, 1), or a key of :data:`MULTIPLIERS`.
    """
    if isinstance(multiplier, str):
        label = label or f"multiplication[{multiplier}]"
        multiplier = MULTIPLIERS[multiplier]
    m = np.broadcast_to(np.asarray(multiplier(grid.nodes), dtype=float), (grid.n,))
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("multiplier must be finite and nonnegative at every node")
    return LinearMonotoneOperator(grid, np.diag(m), label or "multiplication", "multiplication")


def identity_operator(grid: Grid) -> LinearMonotoneOperator:
    return multiplication_operator(grid, "one", "identity")


def zero_operator(grid: Grid) -> LinearMonotoneOperator:
    return multiplication_operator(grid, "zero", "zero")


def _volterra_matrix(grid: Grid) -> np.ndarray:
    if not grid.is_uniform or grid.n < 2:
        raise ValueError("the Volterra discretization needs a uniform grid")
    h = grid.h
    return np.tril(np.full((grid.n, grid.n), h), -1) + np.eye(grid.n) * (h / 2)


def volterra_operator(grid: Grid) -> LinearMonotoneOperator:
    """``(Vx)(s) = int_0^s x(t) dt``.

    Rows integrate the cells left of the node fully and the node's own cell
    by half.  The symmetric part of this matrix is ``(h/2) * ones((n, n))``,
    which is positive semidefinite, so monotonicity holds exactly.
    """
    return LinearMonotoneOperator(grid, _volterra_matrix(grid), "volterra", "volterra")


def cesaro_operator(grid: Grid) -> LinearMonotoneOperator:
    """``(Cx)(s) = (1/s) int_0^s x(t) dt`` as ``diag(1/t) @ V``."""
    v = _volterra_matrix(grid)
    return LinearMonotoneOperator(grid, (1.0 / grid.nodes)[:, None] * v, "cesaro", "cesaro")


def skew_example() -> LinearMonotoneOperator:
    """The rotation ``[[0, -1], [1, 0]]``: invertible yet ``<Ax, x> = 0``.

    Lives on the two-node uniform grid; operator norms do not depend on the
    (equal) weights.
    """
    return LinearMonotoneOperator(make_uniform_grid(2), [[0.0, -1.0], [1.0, 0.0]], "skew", "skew")


class Resolvent:
    """Factorization of ``A + alpha I`` reused across right-hand sides."""

    def __init__(self, op: LinearMonotoneOperator, alpha: float):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha!r}")
        self.op = op
        self.alpha = float(alpha)
        self._shifted = op.matrix + self.alpha * np.eye(op.n)
        if op.structure == "diagonal":
            self._diag = np.diag(self._shifted).copy()
            self._lu = None
        else:
            self._diag = None
            with np.errstate(all="raise"):
                try:
                    self._lu = sla.lu_factor(self._shifted, check_finite=False)
                except (FloatingPointError, sla.LinAlgError) as exc:
                    raise ResolventError(f"LU factorization failed: {exc}", self.condition()) from exc
            if np.any(np.diag(self._lu[0]) == 0):
                raise ResolventError("LU factor is singular", self.condition())

    def condition(self) -> float:
        return float(np.linalg.cond(self._shifted))

    def solve_values(self, rhs: np.ndarray) -> np.ndarray:
        if self._diag is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                z = rhs / self._diag
        else:
            z = sla.lu_solve(self._lu, rhs, check_finite=False)
        if not np.all(np.isfinite(z)):
            raise ResolventError("resolvent solve produced non-finite values", self.condition())
        w = self.op.grid.weights
        res = np.sqrt(np.dot(w, (self._shifted @ z - rhs) ** 2))
        scale = np.sqrt(np.dot(w, rhs**2))
        if res > RESIDUAL_TOL * max(scale, np.finfo(float).tiny):
            raise ResolventError(f"resolvent residual {res:.3e} exceeds tolerance", self.condition())
        return z

    def solve(self, rhs: GridFunction) -> GridFunction:
        if not rhs.grid.same_as(self.op.grid):
            raise ValueError("right-hand side lives on a different grid")
        return GridFunction(rhs.grid, self.solve_values(rhs.values))


def resolvent_solve(A: LinearMonotoneOperator, alpha: float, rhs: GridFunction) -> GridFunction:
    """Solve ``(A + alpha I) z = rhs`` by dense LU with partial pivoting."""
    return Resolvent(A, alpha).solve(rhs)


def weighted_norm(matrix: np.ndarray, grid: Grid) -> float:
    """Weighted L^2 operator norm of a matrix acting on node values."""
    s = np.sqrt(grid.weights)
    return float(sla.svdvals((matrix * s[:, None]) / s[None, :], check_finite=False)[0])


def _power_norm(mt: np.ndarray, tol: float, maxiter: int) -> float:
    # power iteration on mt^T mt; returns sqrt of the Rayleigh quotient
    z = np.ones(mt.shape[1]) + np.linspace(0.0, 1.0, mt.shape[1])
    z /= np.linalg.norm(z)
    lam = 0.0
    for _ in range(maxiter):
        v = mt.T @ (mt @ z)
        new = float(z @ v)
        z = v / np.linalg.norm(v)
        if abs(new - lam) <= tol * new:
            return math.sqrt(new)
        lam = new
    return math.sqrt(lam)


def operator_norm(A: LinearMonotoneOperator, method: str = "svd", tol: float = 1e-12, maxiter: int = 100_000) -> float:
    """Weighted operator norm ``||A||``, exact (``"svd"``) or by power iteration on ``A A*``."""
    if method == "svd":
        return weighted_norm(A.matrix, A.grid)
    if method == "power":
        return _power_norm(A.weighted_matrix(), tol, maxiter)
    raise ValueError(f"unknown method {method!r}")


def estimate_resolvent_norm(A: LinearMonotoneOperator, alpha: float, method: str = "svd",
                            tol: float = 1e-6, maxiter: int = 20_000) -> float:
    """``||(A + alpha I)^{-1}||`` in the weighted metric.

    ``method="svd"`` returns ``1/sigma_min`` of the similarity-transformed
    shifted matrix from a dense SVD.  ``method="power"`` runs power iteration
    on the inverse Gram operator; it converges slowly when the smallest
    singular values cluster, which is the typical ill-posed situation, and
    warns with a lower bound when ``maxiter`` runs out.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    b = A.weighted_matrix() + alpha * np.eye(A.n)
    if method == "svd":
        return float(1.0 / sla.svdvals(b, check_finite=False)[-1])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    lu = sla.lu_factor(b, check_finite=False)
    z = np.ones(A.n) / math.sqrt(A.n)
    lam = 0.0
    for _ in range(maxiter):
        v = sla.lu_solve(lu, sla.lu_solve(lu, z, trans=1))
        lam = float(z @ v)
        # stop on the eigen-residual, not on the Rayleigh increment, which
        # stalls long before convergence when singular values cluster
        if np.linalg.norm(v - lam * z) <= tol * lam:
            return math.sqrt(lam)
        z = v / np.linalg.norm(v)
    warnings.warn(f"power iteration stopped after {maxiter} steps; returning the Rayleigh lower bound",
                  RuntimeWarning, stacklevel=2)
    return math.sqrt(lam)


def resolvent_contraction_norm(A: LinearMonotoneOperator, alpha: float) -> float:
    """``||(A + alpha I)^{-1} A||``, which monotonicity bounds by one."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    b = A.weighted_matrix()
    return float(sla.svdvals(np.linalg.solve(b + alpha * np.eye(A.n), b), check_finite=False)[0])


@dataclass(frozen=True)
class PosednessReport:
    resolvent_norms: tuple[tuple[float, float], ...]
    classification: str
    K: float | None
    ratio_at_smallest: float

    @property
    def is_ill_posed(self) -> bool:
        return self.classification == "ill_posed"


ILL_POSED_RATIO = 0.5


def classify_posedness(A: LinearMonotoneOperator, alphas: Sequence[float]) -> PosednessReport:
    """Tell a plateauing resolvent norm from one that tracks ``1/alpha``.

    The ratio ``alpha * ||(A + alpha I)^{-1}||`` is read at the smallest alpha
    not below the grid cell width (every alpha on non-uniform or scalar
    grids).  A ratio of at least 0.5 classifies the operator as ill-posed;
    otherwise it is well-posed with ``K`` the largest observed norm.  This is
    a diagnostic: every matrix is invertible, so the dichotomy only shows
    asymptotically under refinement.
    """
    alphas = [float(a) for a in alphas]
    if len(alphas) < 3:
        raise ValueError("need at least three alphas")
    if any(a <= 0 for a in alphas) or any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be positive and strictly decreasing")
    if alphas[0] / alphas[-1] < 100.0 * (1 - 1e-12):
        raise ValueError("alphas must span at least two decades")
    norms = [estimate_resolvent_norm(A, a) for a in alphas]
    floor = A.grid.h if A.grid.is_uniform and A.grid.n > 1 else 0.0
    resolvable = [i for i, a in enumerate(alphas) if a >= floor * (1 - 1e-12)] or [len(alphas) - 1]
    i = resolvable[-1]
    ratio = alphas[i] * norms[i]
    pairs = tuple(zip(alphas, norms))
    if ratio >= ILL_POSED_RATIO:
        return PosednessReport(pairs, "ill_posed", None, ratio)
    return PosednessReport(pairs, "well_posed", max(norms), ratio)


class _ShiftSolver:
    """Solves ``(A + s I) z = b`` for many shifts ``s``."""

    def __init__(self, A: LinearMonotoneOperator):
        self.m = A.matrix
        self.kind = A.structure
        self.d = np.diag(self.m).copy()
        if self.kind in ("lower", "upper"):
            self.work = np.array(self.m, order="F")

    def __call__(self, s: float, b: np.ndarray) -> np.ndarray:
        if self.kind == "diagonal":
            return b / (self.d + s)
        if self.kind in ("lower", "upper"):
            np.fill_diagonal(self.work, self.d + s)
            return sla.solve_triangular(self.work, b, lower=self.kind == "lower", check_finite=False)
        return sla.solve(self.m + s * np.eye(self.m.shape[0]), b, check_finite=False)


_GL_ORDER = 8


def _balakrishnan(solve: _ShiftSolver, ax: np.ndarray, p: float, half_width: float, panels: int) -> np.ndarray:
    # int_{-U}^{U} e^{p u} (A + e^u I)^{-1} A x du, composite Gauss-Legendre,
    # plus both tails with the integrand frozen at the truncation points
    g, gw = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(-half_width, half_width, panels + 1)
    acc = np.zeros_like(ax)
    for a, b in zip(edges[:-1], edges[1:]):
        mid, rad = 0.5 * (a + b), 0.5 * (b - a)
        for node, weight in zip(mid + rad * g, rad * gw):
            acc += weight * math.exp(p * node) * solve(math.exp(node), ax)
    z_lo = solve(math.exp(-half_width), ax)
    z_hi = solve(math.exp(half_width), ax) * math.exp(half_width)
    acc += z_lo * math.exp(-p * half_width) / p
    acc += z_hi * math.exp((p - 1.0) * half_width) / (1.0 - p)
    # sin(pi p) = sin(pi (1 - p)); the smaller argument keeps full relative accuracy near p = 1
    return acc * math.sin(math.pi * min(p, 1.0 - p)) / math.pi


def fractional_power_apply(A: LinearMonotoneOperator, p: float, x: GridFunction,
                           tol: float = 1e-8, max_levels: int = 5) -> GridFunction:
    """Apply ``A^p``, ``0 < p <= 1``, through the Balakrishnan integral.

    ``A^p x = sin(pi p)/pi * int_0^inf s^{p-1} (A + sI)^{-1} A x ds``.  With
    ``s = e^u`` the integrand decays like ``e^{pu}`` and ``e^{(p-1)u}`` in the
    two tails.  The window ``[-U, U]`` and the panel count are doubled together
    until the relative change drops below ``tol``.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")
    if p == 1.0:
        return A.apply(x)
    ax = A.matrix @ x.values
    if not np.any(ax):
        return GridFunction(x.grid, np.zeros(x.grid.n))
    solve = _ShiftSolver(A)
    half_width, panels = 16.0, 16
    prev = _balakrishnan(solve, ax, p, half_width, panels)
    change = math.inf
    for _ in range(max_levels):
        half_width, panels = 2 * half_width, 2 * panels
        cur = _balakrishnan(solve, ax, p, half_width, panels)
        scale = max(float(np.linalg.norm(cur)), np.finfo(float).tiny)
        change = float(np.linalg.norm(cur - prev)) / scale
        if change <= tol:
            return GridFunction(x.grid, cur)
        prev = cur
    raise QuadratureError(f"Balakrishnan quadrature not converged: last relative change {change:.3e}")


def monotonicity_defect(A: LinearMonotoneOperator, trials: int = 100,
                        rng: np.random.Generator | int | None = 0) -> float:
    """Smallest ``<Ax, x>`` over unit vectors: random trials and the exact
    minimum eigenvalue of the symmetric part, whichever is smaller."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(rng)
    w = A.grid.weights
    xs = rng.standard_normal((trials, A.n))
    xs /= np.sqrt((xs**2) @ w)[:, None]
    sampled = float(np.min(np.einsum("ij,ij->i", (xs @ A.matrix.T) * w, xs)))
    b = A.weighted_matrix()
    eig = float(np.linalg.eigvalsh(0.5 * (b + b.T))[0])
    return min(sampled, eig)


def export_operator(A: LinearMonotoneOperator, directory: str | Path, stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (row-major matrix) and ``<stem>.json`` ({label, n, kind})."""
    directory = Path(directory)
    stem = stem or A.kind
    csv_path = write_csv(directory / f"{stem}.csv", [f"c{j}" for j in range(A.n)], A.matrix)
    json_path = write_json(directory / f"{stem}.json", {"label": A.label, "n": A.n, "kind": A.kind})
    return csv_path, json_path
