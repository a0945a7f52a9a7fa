"""Nonlinear monotone maps and Lavrentiev regularization ``F(x) + alpha (x - x_bar) = y_delta``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .analysis import RateTable, rate_table
from .grid import Grid, GridFunction, norm, scalar_grid
from .lavrentiev import InequalityCheck, LinearProblem, bias_linear, check_basic_inequalities
from .linops import LinearMonotoneOperator, Resolvent, multiplication_operator

__all__ = [
    "MonotoneMap",
    "NonlinearProblem",
    "SolveInfo",
    "ConvergenceError",
    "linear_map",
    "pointwise_map",
    "power_link_map",
    "exp_link_map",
    "solve_lavrentiev_nonlinear",
    "bias_nonlinear",
    "transfer_constant",
    "bias_transfer_check",
    "nonlinear_inequalities",
    "conditional_stability_rate",
    "scalar",
]

NEWTON_MAXITER = 200
PICARD_MAXITER = 1_000_000
_DERIVATIVE_CAP = 1e12


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """Monotone ``F`` on a grid space with its Frechet derivative.

    ``k0_hint(r)`` bounds the nonlinearity constant on a ball of radius
    ``r``; it is supplied analytically, never estimated from samples.
    """

    grid: Grid
    evaluate: Callable[[GridFunction], GridFunction]
    derivative: Callable[[GridFunction], LinearMonotoneOperator]
    lipschitz: float | None = None
    k0_hint: Callable[[float], float] | None = None
    label: str = ""

    def __call__(self, x: GridFunction) -> GridFunction:
        return self.evaluate(x)

    @property
    def is_scalar(self) -> bool:
        return self.grid.n == 1


def scalar(value: float) -> GridFunction:
    """Embed a real number as a one-node grid function."""
    return GridFunction(_SCALAR, np.array([float(value)]))


_SCALAR = scalar_grid()


def linear_map(A: LinearMonotoneOperator) -> MonotoneMap:
    from .linops import operator_norm

    return MonotoneMap(A.grid, A.apply, lambda x: A, operator_norm(A), lambda r: 0.0, A.label)


def pointwise_map(grid: Grid, phi: Callable[[np.ndarray], np.ndarray], dphi: Callable[[np.ndarray], np.ndarray],
                  lipschitz: float | None = None, k0_hint: Callable[[float], float] | None = None,
                  label: str = "pointwise") -> MonotoneMap:
    """``[F(x)](t) = phi(x(t))`` for a nondecreasing scalar ``phi``."""

    def evaluate(x):
        return GridFunction(grid, phi(x.values))

    def derivative(x):
        slope = np.minimum(dphi(x.values), _DERIVATIVE_CAP)
        return multiplication_operator(grid, lambda t: slope, f"{label}'")

    return MonotoneMap(grid, evaluate, derivative, lipschitz, k0_hint, label)


def _power_link(kappa: float):
    def phi(x):
        x = np.asarray(x, dtype=float)
        c = np.clip(x, -1.0, 1.0)
        return np.sign(c) * np.abs(c) ** kappa

    def dphi(x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        inside = a <= 1.0
        with np.errstate(divide="ignore"):
            d = np.where(a > 0, kappa * a ** (kappa - 1.0), np.inf if kappa < 1 else (1.0 if kappa == 1 else 0.0))
        return np.where(inside, d, 0.0)

    return phi, dphi


def power_link_map(kappa: float) -> MonotoneMap:
    """Scalar odd power ``sign(x)|x|^kappa`` on ``[-1, 1]``, clipped to ``+-1`` outside.

    Continuous and monotone but not coercive.  For ``kappa < 1`` the
    derivative is unbounded at zero; it is capped at ``1e12``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    phi, dphi = _power_link(kappa)
    lip = kappa if kappa >= 1 else None
    return pointwise_map(_SCALAR, phi, dphi, lip, None, f"power-link(kappa={kappa:g})")


def exp_link_map() -> MonotoneMap:
    """Scalar ``F(x) = exp(x) - 1``.

    ``(F'(x') - F'(x)) v = F'(x) (exp(x' - x) - 1) v``, so on a ball of radius
    ``r`` the nonlinearity constant is at most ``(exp(2r) - 1)/(2r)``.
    """
    def k0(r: float) -> float:
        return (math.expm1(2 * r) / (2 * r)) if r > 0 else 1.0

    return pointwise_map(_SCALAR, np.expm1, np.exp, None, k0, "exp-link")


@dataclass(frozen=True, eq=False)
class NonlinearProblem:
    F: MonotoneMap
    x_true: GridFunction
    x_bar: GridFunction
    ball_radius: float | None = None
    y: GridFunction = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "y", self.F(self.x_true))
        gap = norm(self.x_true - self.x_bar)
        if self.ball_radius is None:
            object.__setattr__(self, "ball_radius", 1.25 * gap if gap > 0 else 1.0)
        elif not self.ball_radius > gap:
            raise ValueError("ball_radius must exceed ||x_true - x_bar||")

    @property
    def offset(self) -> GridFunction:
        return self.x_true - self.x_bar


@dataclass(frozen=True)
class SolveInfo:
    method: str
    iterations: int
    residual: float
    converged: bool

    def to_dict(self) -> dict:
        return {"method": self.method, "iterations": self.iterations,
                "residual": self.residual, "converged": self.converged}


def _newton(F: MonotoneMap, rhs: GridFunction, x_bar: GridFunction, alpha: float,
            target: float, x0: GridFunction, maxiter: int) -> tuple[GridFunction, SolveInfo]:
    def G(x):
        return F(x) + alpha * (x - x_bar) - rhs

    x = x0
    g = G(x)
    r = norm(g)
    for it in range(maxiter):
        if r <= target:
            return x, SolveInfo("newton", it, r, True)
        step = Resolvent(F.derivative(x), alpha).solve(-g)
        lam = 1.0
        while lam > 1e-12:
            trial = x + lam * step
            g_trial = G(trial)
            r_trial = norm(g_trial)
            if r_trial < (1 - 1e-4 * lam) * r:
                break
            lam *= 0.5
        else:
            return x, SolveInfo("newton", it, r, False)
        x, g, r = trial, g_trial, r_trial
    return x, SolveInfo("newton", maxiter, r, r <= target)


def _picard(F: MonotoneMap, rhs, x_bar, alpha, target, x0, maxiter):
    tau = alpha / (F.lipschitz + alpha) ** 2
    x = x0
    r = math.inf
    for it in range(maxiter):
        g = F(x) + alpha * (x - x_bar) - rhs
        r = norm(g)
        if r <= target:
            return x, SolveInfo("picard", it, r, True)
        x = x - tau * g
    return x, SolveInfo("picard", maxiter, r, False)


def _bracket(F: MonotoneMap, rhs, x_bar, alpha, target):
    """Scalar fallback: ``G`` is strictly increasing, so bisection-type search is safe."""
    b, xb = float(rhs.values[0]), float(x_bar.values[0])

    def G(v):
        return float(F(scalar(v)).values[0]) + alpha * (v - xb) - b

    lo, hi = xb - 1.0, xb + 1.0
    while G(lo) > 0:
        lo = xb - 2 * (xb - lo)
    while G(hi) < 0:
        hi = xb + 2 * (hi - xb)
    v, res = brentq(G, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500, full_output=True)
    r = abs(G(v))
    return scalar(v), SolveInfo("bracket", res.iterations, r, r <= target)


def solve_lavrentiev_nonlinear(P: NonlinearProblem, y_delta: GridFunction, alpha: float, tol: float = 1e-12,
                               full_output: bool = False, x0: GridFunction | None = None):
    """Solve ``F(x) + alpha (x - x_bar) = y_delta``.

    Damped Newton with Jacobian ``F'(x) + alpha I`` first; on failure, Picard
    iteration with step ``alpha/(L + alpha)^2`` when a Lipschitz bound ``L``
    is known, and bracketing root search for scalar maps.

    Returns
    -------
    x : GridFunction
        Residual at most ``tol * max(1, ||y_delta||)``.
    info : SolveInfo
        Only when ``full_output`` is true.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    target = tol * max(1.0, norm(y_delta))
    start = P.x_bar if x0 is None else x0
    x, info = _newton(P.F, y_delta, P.x_bar, alpha, target, start, NEWTON_MAXITER)
    if not info.converged and P.F.lipschitz is not None:
        x, info = _picard(P.F, y_delta, P.x_bar, alpha, target, x if np.isfinite(info.residual) else start,
                          PICARD_MAXITER)
    if not info.converged and P.F.is_scalar:
        x, info = _bracket(P.F, y_delta, P.x_bar, alpha, target)
    if not info.converged:
        raise ConvergenceError(f"{info.method} did not reach tol={tol:g} at alpha={alpha:g}", info.residual)
    return (x, info) if full_output else x


def bias_nonlinear(P: NonlinearProblem, alpha: float, tol: float = 1e-12) -> float:
    """``||x_alpha - x_true||`` for exact data."""
    return norm(solve_lavrentiev_nonlinear(P, P.y, alpha, tol) - P.x_true)


def nonlinear_inequalities(P: NonlinearProblem, x: GridFunction, delta: float, alpha: float,
                           tol: float, x_clean: GridFunction | None = None) -> InequalityCheck:
    """Basic inequalities for a nonlinear solve, at tolerance ``max(1e-9, 10 tol)``.

    The noise-propagation slack is inflated by the solver tolerance.
    """
    check = check_basic_inequalities(x, P.x_true, P.x_bar, P.F, delta, alpha,
                                     max(1e-9, 10 * tol), x_clean)
    return check


def transfer_constant(k0: float, dist: float) -> float:
    """``(2 + 2 k0 dist) / (2 - k0 dist)``, defined for ``k0 dist < 2``."""
    if not k0 * dist < 2:
        raise ValueError(f"k0 * ||x_true - x_bar|| = {k0 * dist:g} must be below 2")
    return (2 + 2 * k0 * dist) / (2 - k0 * dist)


def bias_transfer_check(P: NonlinearProblem, k0: float | None, alphas: Iterable[float],
                        tol: float = 1e-12) -> tuple[float, list[tuple[float, float]]]:
    """Ratios of nonlinear to linearized bias, with the linearization at ``x_true``.

    Returns the transfer constant ``C`` and ``(alpha, ratio)`` pairs.
    """
    dist = norm(P.offset)
    if dist == 0:
        raise ValueError("x_true == x_bar: linear bias vanishes, ratio undefined")
    if k0 is None:
        if P.F.k0_hint is None:
            raise ValueError("no k0 given and the map has no k0 hint")
        k0 = P.F.k0_hint(P.ball_radius)
    C = transfer_constant(k0, dist)
    lin = LinearProblem(P.F.derivative(P.x_true), P.x_true, P.x_bar)
    pairs = []
    for a in alphas:
        pairs.append((float(a), bias_nonlinear(P, a, tol) / bias_linear(lin, a)))
    return C, pairs


def conditional_stability_rate(kappa: float, deltas: Sequence[float], c: float = 1.0, x_bar: float = 0.25,
                               tol: float = 1e-14, return_rows: bool = False,
                               on_solve: Callable[..., None] | None = None):
    """Error of ``alpha = c delta`` at the well-posed point ``x_true = 0`` of the power link.

    Both noise signs are tried and the larger error kept.  Returns a power
    :class:`~lavreg.analysis.RateTable` in ``delta`` and, with
    ``return_rows``, the ``(delta, alpha, x, abs_error)`` rows.
    ``on_solve(P, delta, alpha, y_delta, x, info)`` is called after every solve.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be positive and strictly decreasing")
    P = NonlinearProblem(power_link_map(kappa), scalar(0.0), scalar(x_bar))
    rows = []
    for d in deltas:
        alpha = c * d
        best = None
        for sign in (1.0, -1.0):
            x, info = solve_lavrentiev_nonlinear(P, scalar(sign * d), alpha, tol, full_output=True)
            if on_solve is not None:
                on_solve(P, d, alpha, scalar(sign * d), x, info)
            err = abs(float(x.values[0]))
            if best is None or err > best[3]:
                best = (d, alpha, float(x.values[0]), err)
        rows.append(best)
    table = rate_table([r[0] for r in rows], [r[3] for r in rows], "power")
    return (table, rows) if return_rows else table
