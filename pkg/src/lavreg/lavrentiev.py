"""Linear Lavrentiev regularization ``A x + alpha (x - x_bar) = y_delta``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .grid import GridFunction, inner, norm
from .io import write_csv
from .linops import LinearMonotoneOperator, Resolvent, operator_norm

__all__ = [
    "LinearProblem",
    "NoisyData",
    "BiasCurve",
    "ParameterRule",
    "InequalityCheck",
    "make_noisy_data",
    "regularize_linear",
    "bias_linear",
    "bias_curve",
    "noise_propagation_gap",
    "total_error",
    "apriori_alpha",
    "saturation_probe",
    "check_basic_inequalities",
    "log_alpha_grid",
    "write_error_table",
    "ERROR_TABLE_COLUMNS",
]

ERROR_TABLE_COLUMNS = ("alpha", "delta", "bias", "gap", "total_error")


@dataclass(frozen=True, eq=False)
class LinearProblem:
    """Operator, exact solution and reference element; ``y = A x_true`` is derived."""

    A: LinearMonotoneOperator
    x_true: GridFunction
    x_bar: GridFunction
    y: GridFunction = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "y", self.A.apply(self.x_true))
        if not self.x_bar.grid.same_as(self.A.grid):
            raise ValueError("x_bar lives on a different grid")

    @property
    def offset(self) -> GridFunction:
        """``x_true - x_bar``."""
        return self.x_true - self.x_bar


@dataclass(frozen=True, eq=False)
class NoisyData:
    y_delta: GridFunction
    delta: float
    seed: int | None = None


def make_noisy_data(y: GridFunction | LinearProblem, delta: float, seed: int | Sequence[int] | None = 0) -> NoisyData:
    """Gaussian perturbation of ``y`` rescaled to weighted norm exactly ``delta``."""
    if isinstance(y, LinearProblem):
        y = y.y
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return NoisyData(y, 0.0, None if seed is None else _seed_tag(seed))
    raw = GridFunction(y.grid, np.random.default_rng(seed).standard_normal(y.grid.n))
    return NoisyData(y + raw * (delta / norm(raw)), float(delta), _seed_tag(seed))


def _seed_tag(seed):
    if seed is None or isinstance(seed, (int, np.integer)):
        return None if seed is None else int(seed)
    return [int(s) for s in seed]


def _resolvent(P: LinearProblem, alpha: float, resolvent: Resolvent | None) -> Resolvent:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if resolvent is not None:
        if resolvent.op is not P.A or resolvent.alpha != alpha:
            raise ValueError("resolvent does not match (operator, alpha)")
        return resolvent
    return Resolvent(P.A, alpha)


def regularize_linear(P: LinearProblem, D: NoisyData, alpha: float, resolvent: Resolvent | None = None) -> GridFunction:
    """``x_alpha^delta = (A + alpha I)^{-1} (y_delta + alpha x_bar)``."""
    return _resolvent(P, alpha, resolvent).solve(D.y_delta + alpha * P.x_bar)


def bias_linear(P: LinearProblem, alpha: float, resolvent: Resolvent | None = None) -> float:
    """Noise-free error ``alpha * ||(A + alpha I)^{-1} (x_true - x_bar)||``."""
    return alpha * norm(_resolvent(P, alpha, resolvent).solve(P.offset))


def noise_propagation_gap(P: LinearProblem, D: NoisyData, alpha: float, resolvent: Resolvent | None = None) -> float:
    """``||x_alpha - x_alpha^delta||``; never exceeds ``delta / alpha``."""
    res = _resolvent(P, alpha, resolvent)
    clean = regularize_linear(P, NoisyData(P.y, 0.0), alpha, res)
    return norm(clean - regularize_linear(P, D, alpha, res))


def total_error(P: LinearProblem, D: NoisyData, alpha: float, resolvent: Resolvent | None = None) -> float:
    return norm(regularize_linear(P, D, alpha, resolvent) - P.x_true)


@dataclass(frozen=True)
class BiasCurve:
    alphas: tuple[float, ...]
    values: tuple[float, ...]
    kind: str = "linear"

    def ratios(self) -> np.ndarray:
        """``B(alpha) / alpha``."""
        return np.asarray(self.values) / np.asarray(self.alphas)


def log_alpha_grid(lo: float = 1e-6, hi: float = 1.0, per_decade: int = 20) -> np.ndarray:
    """Log-uniform, decreasing alpha grid from ``hi`` to ``lo``."""
    decades = math.log10(hi / lo)
    return np.logspace(math.log10(hi), math.log10(lo), int(round(decades * per_decade)) + 1)


def bias_curve(P: LinearProblem, alphas: Iterable[float]) -> BiasCurve:
    alphas = tuple(float(a) for a in alphas)
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")
    return BiasCurve(alphas, tuple(bias_linear(P, a) for a in alphas), "linear")


@dataclass(frozen=True)
class ParameterRule:
    """A priori rule ``alpha(delta)``.

    Use the constructors :meth:`linear`, :meth:`power` and
    :meth:`psi_inverse`.  The last one takes anything exposing
    ``psi_inverse(delta)``, e.g. a ``DistanceCurve`` or ``DecayModel``.
    """

    kind: str
    c: float = 1.0
    exponent: float = 1.0
    model: Any = None

    @classmethod
    def linear(cls, c: float = 1.0) -> "ParameterRule":
        return cls("linear", float(c), 1.0)

    @classmethod
    def power(cls, c: float = 1.0, exponent: float = 0.5) -> "ParameterRule":
        if not 0.0 < exponent <= 1.0:
            raise ValueError("power-rule exponent must lie in (0, 1]")
        return cls("power", float(c), float(exponent))

    @classmethod
    def psi_inverse(cls, model) -> "ParameterRule":
        return cls("psi_inverse", 1.0, float("nan"), model)

    def to_dict(self) -> dict:
        if self.kind == "psi_inverse":
            return {"kind": self.kind}
        return {"kind": self.kind, "c": self.c, "exponent": self.exponent}


def apriori_alpha(delta: float, rule: ParameterRule) -> float:
    """``c delta``, ``c delta^theta`` or ``Psi^{-1}(delta)``."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if rule.kind == "linear":
        return rule.c * delta
    if rule.kind == "power":
        return rule.c * delta**rule.exponent
    if rule.kind == "psi_inverse":
        if rule.model is None:
            raise ValueError("psi_inverse rule needs a fitted distance model")
        return float(rule.model.psi_inverse(delta))
    raise ValueError(f"unknown rule kind {rule.kind!r}")


def saturation_probe(P: LinearProblem, alphas: Sequence[float]) -> float:
    """Liminf estimate of ``B(alpha)/alpha``: the minimum over the smaller half of ``alphas``.

    Never below ``||x_true - x_bar|| / (||A|| + max(alphas))``; it stays
    bounded exactly when the benchmark source condition holds.
    """
    alphas = [float(a) for a in alphas]
    if len(alphas) < 4 or any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("need at least four strictly decreasing alphas")
    if norm(P.offset) == 0.0:
        raise ValueError("x_true == x_bar is the singular case; B(alpha) = 0 identically")
    ratios = [bias_linear(P, a) / a for a in alphas]
    return float(min(ratios[len(ratios) // 2:]))


def saturation_lower_bound(P: LinearProblem, alpha: float) -> float:
    """``||x_true - x_bar|| / (||A|| + alpha)``, a floor for ``B(alpha)/alpha``."""
    return norm(P.offset) / (operator_norm(P.A) + alpha)


__all__.append("saturation_lower_bound")


@dataclass(frozen=True)
class InequalityCheck:
    """Slack of the three basic inequalities and of the noise-propagation bound.

    Each ``*_slack`` is ``right-hand side - left-hand side``; the inequality
    holds when the slack is at least ``-tol``.
    """

    alpha: float
    delta: float
    ie1_slack: float
    ie2_slack: float
    ie3_slack: float
    gap_slack: float | None
    tol: float

    @property
    def passed(self) -> bool:
        slacks = [self.ie1_slack, self.ie2_slack, self.ie3_slack]
        if self.gap_slack is not None:
            slacks.append(self.gap_slack)
        return all(s >= -self.tol for s in slacks)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "delta": self.delta, "ie1_slack": self.ie1_slack,
                "ie2_slack": self.ie2_slack, "ie3_slack": self.ie3_slack,
                "gap_slack": self.gap_slack, "tol": self.tol, "passed": self.passed}


def check_basic_inequalities(x: GridFunction, x_true: GridFunction, x_bar: GridFunction,
                             forward: Callable[[GridFunction], GridFunction], delta: float, alpha: float,
                             tol: float = 1e-9, x_clean: GridFunction | None = None) -> InequalityCheck:
    """Evaluate the three basic error inequalities for one regularized solve.

    With ``e = ||x - x_true||`` and ``u = x_true - x_bar``:
    ``e^2 <= <u, x_true - x> + (delta/alpha) e``, ``e <= ||u|| + delta/alpha``
    and ``||F(x) - F(x_true)|| <= alpha ||u|| + delta``.  When the noise-free
    solution ``x_clean`` is given the bound ``||x - x_clean|| <= delta/alpha``
    is checked too.
    """
    u = x_true - x_bar
    err = norm(x - x_true)
    ratio = delta / alpha
    ie1 = inner(u, x_true - x) + ratio * err - err**2
    ie2 = norm(u) + ratio - err
    ie3 = alpha * norm(u) + delta - norm(forward(x) - forward(x_true))
    gap = None if x_clean is None else ratio - norm(x - x_clean)
    return InequalityCheck(float(alpha), float(delta), ie1, ie2, ie3, gap, tol)


def write_error_table(rows: Iterable[Sequence[float]], path: str | Path) -> Path:
    """CSV with columns ``alpha,delta,bias,gap,total_error``."""
    return write_csv(path, ERROR_TABLE_COLUMNS, rows)
