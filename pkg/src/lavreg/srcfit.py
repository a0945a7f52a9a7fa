"""Distance functions to the benchmark range and the rates they imply.

``d(R) = min{||u - A w|| : ||w|| <= R}`` measures how far ``u = x_true - x_bar``
is from satisfying ``u = A w``.  It is traced by sweeping the Lagrange
parameter of the Tikhonov normal equations ``(A*A + mu I) w = A* u``: each
``mu`` for which the constraint is active yields the exact constrained optimum
at ``R = ||w_mu||``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .grid import Grid, GridFunction, heaviside, norm
from .io import write_csv, write_json
from .linops import LinearMonotoneOperator, ResolventError, cesaro_operator

__all__ = [
    "DistanceCurve",
    "DecayModel",
    "distance_function",
    "distance_at",
    "fit_decay",
    "concave_majorant",
    "bias_bound_from_distance",
    "psi_parameter_choice",
    "cesaro_witness",
    "verify_cesaro_witness",
    "cesaro_witness_bound",
    "constrained_distance_pg",
    "MAX_CONDITION",
    "USABLE_DISTANCE",
]

MAX_CONDITION = 1e14
USABLE_DISTANCE = 1e-10
_MONOTONE_TOL = 1e-12


def _isometric(A: LinearMonotoneOperator, u: GridFunction):
    """SVD of ``W^{1/2} M W^{-1/2}`` and the coefficients of ``W^{1/2} u``."""
    if not u.grid.same_as(A.grid):
        raise ValueError("u lives on a different grid")
    sw = np.sqrt(A.grid.weights)
    U, s, Vt = np.linalg.svd(A.weighted_matrix())
    ut = sw * u.values
    c = U.T @ ut
    return U, s, Vt, c, sw


@dataclass(frozen=True)
class DistanceCurve:
    """Tabulated ``d(R)`` with increasing radii.

    ``mu_values`` is empty for synthetic curves.
    """

    radii: tuple[float, ...]
    distances: tuple[float, ...]
    mu_values: tuple[float, ...] = ()
    element_label: str = ""
    rejected_mu: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        R = np.asarray(self.radii, dtype=float)
        d = np.asarray(self.distances, dtype=float)
        if R.ndim != 1 or R.shape != d.shape or R.size < 2:
            raise ValueError("need at least two (R, d) points of matching length")
        if self.mu_values and len(self.mu_values) != R.size:
            raise ValueError("mu_values must match the radii")
        if np.any(R <= 0) or np.any(np.diff(R) <= 0):
            raise ValueError("radii must be positive and strictly increasing")
        if np.any(d < 0) or np.any(np.diff(d) >= _MONOTONE_TOL * max(1.0, d[0])):
            raise ValueError("distances must be nonnegative and strictly decreasing")

    @property
    def R(self) -> np.ndarray:
        return np.asarray(self.radii)

    @property
    def d(self) -> np.ndarray:
        return np.asarray(self.distances)

    def __len__(self):
        return len(self.radii)

    def second_differences(self) -> np.ndarray:
        """Change of the secant slope of ``d`` against ``R`` between consecutive cells."""
        slopes = np.diff(self.d) / np.diff(self.R)
        return np.diff(slopes)

    def is_convex(self, tol: float = 1e-10) -> bool:
        """``d`` is the value function of a convex program, hence convex in ``R``."""
        return bool(np.all(self.second_differences() >= -tol))

    def usable(self, floor: float = USABLE_DISTANCE) -> "DistanceCurve":
        keep = self.d > floor
        return DistanceCurve(tuple(self.R[keep]), tuple(self.d[keep]),
                             tuple(np.asarray(self.mu_values)[keep]) if self.mu_values else (),
                             self.element_label)

    def phi(self) -> np.ndarray:
        """``Phi(R) = d(R)/R``, strictly decreasing."""
        return self.d / self.R

    def psi(self) -> np.ndarray:
        """``Psi`` at the tabulated ``alpha_i = Phi(R_i)``: ``d_i^2 / R_i``."""
        return self.d**2 / self.R

    def distance(self, R: float) -> float:
        """Log-log interpolation of ``d`` inside the tabulated range."""
        return float(np.exp(_interp_inside(math.log(R), np.log(self.R), np.log(self.d), "R")))

    def phi_inverse(self, alpha: float) -> float:
        lphi = np.log(self.phi())[::-1]
        return float(np.exp(_interp_inside(math.log(alpha), lphi, np.log(self.R)[::-1], "alpha")))

    def psi_inverse(self, delta: float) -> float:
        lpsi = np.log(self.psi())[::-1]
        return float(np.exp(_interp_inside(math.log(delta), lpsi, np.log(self.phi())[::-1], "delta")))

    def write_csv(self, path: str | Path) -> Path:
        """Columns ``mu,R,d``; ``mu`` is NaN for synthetic curves."""
        mu = self.mu_values or (float("nan"),) * len(self)
        return write_csv(path, ("mu", "R", "d"), zip(mu, self.radii, self.distances))


def _interp_inside(x: float, xs: np.ndarray, ys: np.ndarray, what: str) -> float:
    if not np.all(np.diff(xs) > 0):
        raise ValueError(f"tabulated {what} values are not strictly monotone")
    if not xs[0] - 1e-12 <= x <= xs[-1] + 1e-12:
        raise ValueError(f"{what}={math.exp(x):.6g} outside tabulated range "
                         f"[{math.exp(xs[0]):.6g}, {math.exp(xs[-1]):.6g}]; refusing to extrapolate")
    return float(np.interp(x, xs, ys))


def distance_function(A: LinearMonotoneOperator, u: GridFunction, mu_grid: Sequence[float],
                      label: str = "", majorant: bool = False) -> DistanceCurve:
    """Trace ``d(R)`` along the Tikhonov path.

    Parameters
    ----------
    mu_grid : sequence of float
        Positive, strictly decreasing, spanning at least six decades.
    majorant : bool
        Replace the raw curve with :func:`concave_majorant`.

    Notes
    -----
    One SVD of the weighted matrix serves every ``mu``.  A ``mu`` whose normal
    equations have condition ``(s_max^2 + mu)/(s_min^2 + mu)`` above
    ``MAX_CONDITION`` is dropped and listed in ``rejected_mu``; points where
    the path has stalled in floating point (no strict monotonicity) are
    dropped silently.
    """
    mu = np.asarray(mu_grid, dtype=float)
    if mu.ndim != 1 or mu.size < 2 or np.any(mu <= 0) or np.any(np.diff(mu) >= 0):
        raise ValueError("mu_grid must be positive and strictly decreasing")
    if math.log10(mu[0] / mu[-1]) < 6 - 1e-9:
        raise ValueError("mu_grid must span at least six decades")
    _, s, _, c, _ = _isometric(A, u)
    outside = max(norm(u) ** 2 - float(c @ c), 0.0)
    radii, dists, kept, rejected = [], [], [], []
    for m in mu:
        cond = (s[0] ** 2 + m) / (s[-1] ** 2 + m)
        if cond > MAX_CONDITION:
            rejected.append(float(m))
            continue
        R = float(np.linalg.norm(s / (s**2 + m) * c))
        d = float(math.sqrt(float(np.sum((m / (s**2 + m) * c) ** 2)) + outside))
        if R <= 0 or (radii and (R <= radii[-1] or d >= dists[-1])):
            continue
        radii.append(R)
        dists.append(d)
        kept.append(float(m))
    if len(radii) < 2:
        if rejected and not kept:
            raise ResolventError("every mu gives numerically singular normal equations",
                                 (s[0] ** 2 + mu[0]) / (s[-1] ** 2 + mu[0]))
        raise ValueError("the constraint is never active: Au is zero, d(R) = ||u|| for every R")
    curve = DistanceCurve(tuple(radii), tuple(dists), tuple(kept), label, tuple(rejected))
    return concave_majorant(curve) if majorant else curve


def distance_at(A: LinearMonotoneOperator, u: GridFunction, R: float) -> float:
    """``d(R)`` at one radius, by root-finding the Lagrange parameter."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    _, s, _, c, _ = _isometric(A, u)
    outside = max(norm(u) ** 2 - float(c @ c), 0.0)
    pos = s > s[0] * 1e-14 if s[0] > 0 else np.zeros_like(s, dtype=bool)
    # unconstrained least-squares optimum: pseudo-inverse solution
    r_free = float(np.linalg.norm(c[pos] / s[pos]))
    floor = math.sqrt(float(np.sum(c[~pos] ** 2)) + outside)
    if R >= r_free:
        return floor

    def radius(log_mu):
        m = math.exp(log_mu)
        return float(np.linalg.norm(s / (s**2 + m) * c)) - R

    lo, hi = -80.0, 80.0
    log_mu = brentq(radius, lo, hi, xtol=1e-14) if radius(hi) < 0 < radius(lo) else hi
    m = math.exp(log_mu)
    return float(math.sqrt(float(np.sum((m / (s**2 + m) * c) ** 2)) + outside))


def concave_majorant(curve: DistanceCurve) -> DistanceCurve:
    """Upper concave hull of the curve in log-log coordinates.

    The hull lies on or above every tabulated point, keeps the radii and is
    still strictly decreasing, so it is an admissible majorant for the
    ``Phi``/``Psi`` constructions.  It smooths quadrature wiggles.
    """
    x, y = np.log(curve.R), np.log(curve.d)
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            if (y[i1] - y[i0]) * (x[i] - x[i0]) <= (y[i] - y[i0]) * (x[i1] - x[i0]):
                hull.pop()
            else:
                break
        hull.append(i)
    yh = np.interp(x, x[hull], y[hull])
    return DistanceCurve(curve.radii, tuple(np.maximum(np.exp(yh), curve.d)), curve.mu_values,
                         curve.element_label + " (majorant)", curve.rejected_mu)


@dataclass(frozen=True)
class DecayModel:
    """Fitted tail of a distance function.

    ``power``: ``d = constant * R**exponent`` (exponent < 0).
    ``logarithmic``: ``d = constant / log(R)**exponent`` (exponent > 0).
    ``benchmark``: ``d`` vanishes once ``R >= constant`` (the norm of ``w``).
    """

    kind: str
    exponent: float
    constant: float
    fit_range: tuple[float, float]
    residual: float

    def __post_init__(self):
        if self.kind == "power" and not self.exponent < 0:
            raise ValueError("power decay needs a negative exponent")
        if self.kind == "logarithmic" and not (self.exponent > 0 and self.constant > 0):
            raise ValueError("logarithmic decay needs q > 0 and K > 0")
        if self.kind not in ("power", "logarithmic", "benchmark"):
            raise ValueError(f"unknown decay kind {self.kind!r}")

    @property
    def implied_p(self) -> float:
        """Source exponent ``p`` with ``exponent = p/(p-1)``."""
        if self.kind == "benchmark":
            return 1.0
        if self.kind != "power":
            raise ValueError("implied p is defined for power decay only")
        return self.exponent / (self.exponent - 1.0)

    def distance(self, R: float) -> float:
        if self.kind == "power":
            return self.constant * R**self.exponent
        if self.kind == "logarithmic":
            if R <= 1:
                raise ValueError("logarithmic model needs R > 1")
            return self.constant / math.log(R) ** self.exponent
        return 0.0 if R >= self.constant else float("inf")

    def psi(self, alpha: float) -> float:
        """``Psi(alpha) = alpha * d(Phi^{-1}(alpha))``."""
        if self.kind == "benchmark":
            return alpha**2 * self.constant
        if self.kind == "power":
            p = self.implied_p
            return self.constant ** (1.0 - p) * alpha ** (1.0 + p)

        def phi_gap(log_r):
            return math.log(self.distance(math.exp(log_r)) / math.exp(log_r)) - math.log(alpha)

        log_r = brentq(phi_gap, 1e-9, 1e4)
        return alpha * self.distance(math.exp(log_r))

    def psi_inverse(self, delta: float) -> float:
        if self.kind == "benchmark":
            return math.sqrt(delta / self.constant)
        if self.kind == "power":
            p = self.implied_p
            return (delta / self.constant ** (1.0 - p)) ** (1.0 / (1.0 + p))
        return math.exp(brentq(lambda la: math.log(self.psi(math.exp(la))) - math.log(delta), -600.0, -1e-9))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "exponent": self.exponent, "constant": self.constant,
                "fit_range": list(self.fit_range), "residual": self.residual}

    def write_json(self, path: str | Path) -> Path:
        return write_json(path, self.to_dict())


def _lsq(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and RMS residual of a straight-line fit."""
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = float(np.sqrt(np.mean((y - design @ [slope, intercept]) ** 2)))
    return float(slope), float(intercept), rms


def fit_decay(curve: DistanceCurve, fit_range: tuple[float, float] | None = None,
              min_slope: float = 1e-3) -> DecayModel:
    """Fit power and logarithmic decay to the tail and keep the better one.

    The tail is the largest-``R`` half of the usable points (``d > 1e-10``)
    unless ``fit_range`` is given.  A curve that collapses to zero yields a
    ``benchmark`` model; a curve without decay raises ``ValueError``.
    """
    R, d = curve.R, curve.d
    usable = d > USABLE_DISTANCE
    if np.count_nonzero(usable) < 10:
        if np.any(~usable):
            r0 = float(R[np.argmax(~usable)])
            return DecayModel("benchmark", float("nan"), r0, (float(R[0]), r0), 0.0)
        raise ValueError("need at least 10 points with d > 1e-10")
    R, d = R[usable], d[usable]
    if fit_range is None:
        R, d = R[R.size // 2:], d[d.size // 2:]
    else:
        keep = (R >= fit_range[0]) & (R <= fit_range[1])
        R, d = R[keep], d[keep]
        if R.size < 5:
            raise ValueError("fewer than 5 points inside fit_range")
    lr, ld = np.log(R), np.log(d)
    e, log_c, res_pow = _lsq(lr, ld)
    candidates = []
    if e < -min_slope:
        candidates.append((res_pow, DecayModel("power", e, math.exp(log_c), (float(R[0]), float(R[-1])), res_pow)))
    if R[0] > 1.0:
        slope, log_k, res_log = _lsq(np.log(lr), ld)
        if -slope > min_slope:
            candidates.append((res_log, DecayModel("logarithmic", -slope, math.exp(log_k),
                                                   (float(R[0]), float(R[-1])), res_log)))
    if not candidates:
        raise ValueError("distance function shows no decay on the fitted range")
    return min(candidates, key=lambda rc: rc[0])[1]


def bias_bound_from_distance(curve: DistanceCurve, alpha: float) -> float:
    """``2 d(Phi^{-1}(alpha))``; refuses alpha outside the tabulated ``Phi`` range."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    usable = curve.usable()
    return 2.0 * usable.distance(usable.phi_inverse(alpha))


def psi_parameter_choice(curve: DistanceCurve, delta: float) -> float:
    """``alpha(delta) = Psi^{-1}(delta)`` by monotone log-log interpolation."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return curve.usable().psi_inverse(delta)


def cesaro_witness(grid: Grid, R: float) -> GridFunction:
    """Explicit element with ``||u - C w_R|| = O(1/R)`` for the Heaviside ``u``.

    Zero on ``[0, 1/2)``, ``R^2`` on ``[1/2, 1/2 + 1/(2R^2)]`` and one beyond,
    averaged over each quadrature cell so the spike keeps its mass of 1/2.
    """
    left = grid.nodes - 0.5 * grid.weights
    right = grid.nodes + 0.5 * grid.weights
    edge = 0.5 + 0.5 / R**2

    def overlap(a, b):
        return np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None)

    values = (R**2 * overlap(0.5, edge) + overlap(edge, np.inf)) / grid.weights
    return GridFunction(grid, values)


def verify_cesaro_witness(grid: Grid, R: float) -> float:
    """Residual ``||u - C w_R||`` of :func:`cesaro_witness` on ``grid``."""
    if R < 2:
        raise ValueError("witness needs R >= 2")
    if 0.5 / R**2 < grid.h:
        raise ValueError(f"spike width 1/(2R^2)={0.5 / R**2:.3g} is below one cell; refine the grid")
    C = cesaro_operator(grid)
    return norm(heaviside(grid) - C.apply(cesaro_witness(grid, R)))


def cesaro_witness_bound(R: float) -> float:
    """Closed-form upper bound for the witness residual."""
    r2 = R * R
    bracket = (r2 - 1) ** 2 / (24 * r2**3) - (r2 - 1) / (8 * r2**2) + 1 / (8 * r2) + 1 / (8 * r2**2) - 1 / (8 * r2**3)
    return 2.0 * math.sqrt(bracket)


def constrained_distance_pg(A: LinearMonotoneOperator, u: GridFunction, R: float,
                            iterations: int = 100_000, tol: float = 1e-15) -> float:
    """``d(R)`` by projected gradient on the ball, independent of the Tikhonov path.

    Works in isometric coordinates (where the weighted norm is Euclidean)
    with step ``1/||A||^2`` and Nesterov momentum.
    """
    sw = np.sqrt(A.grid.weights)
    M = A.weighted_matrix()
    ut = sw * u.values
    L = float(np.linalg.norm(M, 2)) ** 2
    if L == 0:
        return norm(u)

    def project(v):
        nv = np.linalg.norm(v)
        return v if nv <= R else v * (R / nv)

    w = np.zeros_like(ut)
    z, t = w.copy(), 1.0
    for _ in range(iterations):
        w_new = project(z - (M.T @ (M @ z - ut)) / L)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = w_new + ((t - 1) / t_new) * (w_new - w)
        if np.linalg.norm(w_new - w) <= tol * max(1.0, R):
            w = w_new
            break
        w, t = w_new, t_new
    return float(np.linalg.norm(ut - M @ w))
