"""Empirical convergence orders and bound-versus-observation comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io import write_csv, write_json

__all__ = [
    "RateTable",
    "BoundReport",
    "fit_power_rate",
    "fit_log_rate",
    "rate_table",
    "compare_bound",
    "LOG_RATE_NOTE",
    "MIN_ERROR",
]

MIN_ERROR = 1e-14

LOG_RATE_NOTE = ("logarithmic regime reported as error ~ K * log(1/driver)^(-q), "
                 "the decaying reading of the logarithmic rate")


def _records(records) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(records, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("records must be (driver, error) pairs")
    return arr[:, 0], arr[:, 1]


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """OLS slope, intercept, r^2 and RMS residual."""
    if x.size < 3:
        raise ValueError("need at least 3 records")
    if np.ptp(x) == 0:
        raise ValueError("drivers are all equal")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2, float(np.sqrt(np.mean(resid**2)))


def _check_positive(drivers, errors):
    if np.any(drivers <= 0):
        raise ValueError("drivers must be positive")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive for a logarithmic fit")


def fit_power_rate(records) -> tuple[float, float, float]:
    """``log error = slope * log driver + intercept``; returns (slope, intercept, r^2)."""
    drivers, errors = _records(records)
    _check_positive(drivers, errors)
    slope, intercept, r2, _ = _line_fit(np.log(drivers), np.log(errors))
    return slope, intercept, r2


def fit_log_rate(records) -> tuple[float, float, float]:
    """``error = K * log(1/driver)^(-q)``; returns (q, K, r^2)."""
    drivers, errors = _records(records)
    _check_positive(drivers, errors)
    if np.any(drivers >= 1):
        raise ValueError("logarithmic fit needs drivers < 1")
    slope, intercept, r2, _ = _line_fit(np.log(np.log(1.0 / drivers)), np.log(errors))
    return -slope, math.exp(intercept), r2


@dataclass(frozen=True)
class RateTable:
    """(driver, error) records, sorted by decreasing driver, with a fitted order.

    For the power regime ``slope`` is the empirical order and ``intercept``
    the log constant; for the logarithmic regime ``slope`` holds ``q`` and
    ``intercept`` holds ``K``.
    """

    drivers: tuple[float, ...]
    errors: tuple[float, ...]
    fitted_slope: float
    fitted_intercept: float
    regime: str
    r_squared: float
    fit_range: tuple[float, float]
    n_points: int
    residual: float = float("nan")
    driver_name: str = "delta"

    def __post_init__(self):
        if any(b > a for a, b in zip(self.drivers, self.drivers[1:])):
            raise ValueError("records must be sorted by decreasing driver")
        if any(e < 0 for e in self.errors):
            raise ValueError("errors must be nonnegative")

    @property
    def records(self) -> list[tuple[float, float]]:
        return list(zip(self.drivers, self.errors))

    def to_dict(self) -> dict:
        out = {"regime": self.regime, "slope_or_q": self.fitted_slope,
               "intercept_or_K": self.fitted_intercept, "r_squared": self.r_squared,
               "fit_range": list(self.fit_range), "n_points": self.n_points,
               "driver": self.driver_name}
        if self.regime == "logarithmic":
            out["note"] = LOG_RATE_NOTE
        return out

    def write(self, stem: str | Path) -> tuple[Path, Path]:
        """``<stem>.csv`` with the records and ``<stem>.json`` with the fit."""
        stem = Path(stem)
        csv_path = write_csv(stem.with_suffix(".csv"), (self.driver_name, "error"), self.records)
        return csv_path, write_json(stem.with_suffix(".json"), self.to_dict())


def rate_table(drivers: Iterable[float], errors: Iterable[float], regime: str = "power",
               mask: Sequence[bool] | None = None, driver_name: str = "delta") -> RateTable:
    """Sort the records, fit the requested regime on ``mask`` and package the result.

    ``regime="auto"`` fits both models and keeps the one with the smaller
    RMS residual in log-error coordinates.
    """
    d = np.asarray(list(drivers), dtype=float)
    e = np.asarray(list(errors), dtype=float)
    if d.shape != e.shape:
        raise ValueError("drivers and errors differ in length")
    m = np.ones(d.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    order = np.argsort(-d, kind="stable")
    d, e, m = d[order], e[order], m[order]
    m &= e > MIN_ERROR
    if np.count_nonzero(m) < 3:
        raise ValueError("fewer than 3 records with error above 1e-14")
    x, y = d[m], e[m]
    fits = {}
    if regime in ("power", "auto"):
        s, b, r2, res = _line_fit(np.log(x), np.log(y))
        fits["power"] = (s, b, r2, res)
    if regime in ("logarithmic", "auto"):
        if np.any(x >= 1):
            if regime == "logarithmic":
                raise ValueError("logarithmic fit needs drivers < 1")
        else:
            s, b, r2, res = _line_fit(np.log(np.log(1.0 / x)), np.log(y))
            fits["logarithmic"] = (-s, math.exp(b), r2, res)
    if not fits:
        raise ValueError(f"unknown regime {regime!r}")
    best = min(fits, key=lambda k: fits[k][3])
    s, b, r2, res = fits[best]
    return RateTable(tuple(d), tuple(e), s, b, best, r2, (float(x.min()), float(x.max())),
                     int(x.size), res, driver_name)


@dataclass(frozen=True)
class BoundReport:
    ratios: tuple[float, ...]
    max_ratio: float
    passed: bool
    slack: float

    def to_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "passed": self.passed, "slack": self.slack,
                "ratios": list(self.ratios)}


def compare_bound(observed: RateTable | Sequence[tuple[float, float]], bound: Sequence[tuple[float, float]],
                  slack: float = 0.0, rtol: float = 1e-12) -> BoundReport:
    """Largest ``observed / (bound + slack)`` over matched drivers; passes at ``<= 1 + 1e-6``."""
    obs = observed.records if isinstance(observed, RateTable) else list(observed)
    if len(obs) != len(bound):
        raise ValueError("observed and bound have different lengths")
    lookup = sorted(bound, key=lambda r: -r[0])
    obs = sorted(obs, key=lambda r: -r[0])
    ratios = []
    for (d_obs, e_obs), (d_b, v_b) in zip(obs, lookup):
        if not math.isclose(d_obs, d_b, rel_tol=rtol):
            raise ValueError(f"driver mismatch: {d_obs!r} vs {d_b!r}")
        denom = v_b + slack
        ratios.append(e_obs / denom if denom > 0 else (0.0 if e_obs == 0 else math.inf))
    top = max(ratios) if ratios else 0.0
    return BoundReport(tuple(ratios), top, top <= 1 + 1e-6, slack)
