"""Empirical convergence exponents by log-log regression.

Deviation series computed by the exact engines carry no statistical noise,
so plain unweighted least squares in log space recovers decay exponents to
the accuracy of the leading-order law itself.  The crossover scan drives
the three-panel picture of the exponent as a function of the memory
parameter: odd orders on the line (1-2a)/2, higher even orders flat at 1
up to a = 0 and then 1-2a, the second order on 1-2a with its two
identically-zero points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .asymptotics import DecayKind, predict_rate
from .core import ErwParams, ValidationError
from .deviations import (
    DeviationSeries,
    Normalization,
    deviations_even_family,
    deviations_odd_family,
)

__all__ = [
    "DegenerateSeriesError",
    "FitResult",
    "ScanCell",
    "fit_power_exponent",
    "fit_log_exponent",
    "crossover_scan",
    "scan_to_csv",
    "DEFAULT_ALPHA_GRID",
    "DEFAULT_ORDERS",
]

#: Grid of memory parameters for the crossover scan.
DEFAULT_ALPHA_GRID = (
    Fraction(-9, 10),
    Fraction(-3, 4),
    Fraction(-1, 2),
    Fraction(-1, 4),
    Fraction(-1, 10),
    Fraction(0),
    Fraction(1, 10),
    Fraction(1, 4),
    Fraction(2, 5),
)

DEFAULT_ORDERS = (1, 2, 3, 4, 5, 6)

MIN_WINDOW_POINTS = 10


class DegenerateSeriesError(ValidationError):
    """A fit was refused: zero or sign change inside the window, which
    signals an identically-zero branch or a horizon too short to settle."""


@dataclass(frozen=True)
class FitResult:
    """Least-squares decay fit of one deviation series."""

    exponent: float
    coefficient: float
    window: tuple[int, int]
    residual_rms: float
    points: int
    kind: DecayKind

    def __post_init__(self):
        lo, hi = self.window
        if not lo < hi:
            raise ValidationError(f"fit window must satisfy n_lo < n_hi, got {self.window}")
        if not math.isfinite(self.residual_rms):
            raise ValidationError("fit residual must be finite")
        if self.points < MIN_WINDOW_POINTS:
            raise ValidationError(
                f"fit window must contain >= {MIN_WINDOW_POINTS} grid points"
            )


def _windowed(series: DeviationSeries, window):
    lo, hi = window
    if not lo < hi:
        raise ValidationError(f"window must satisfy n_lo < n_hi, got {window}")
    sel = (series.grid >= lo) & (series.grid <= hi)
    n = series.grid[sel].astype(np.float64)
    v = series.values[sel]
    if n.size < MIN_WINDOW_POINTS:
        raise ValidationError(
            f"window {window} holds {n.size} grid points, need >= {MIN_WINDOW_POINTS}"
        )
    if np.any(v == 0.0):
        raise DegenerateSeriesError(
            f"series of order {series.order} vanishes inside {window}"
        )
    signs = np.sign(v)
    if np.any(signs != signs[0]):
        raise DegenerateSeriesError(
            f"series of order {series.order} changes sign inside {window}"
        )
    return n, v, float(signs[0])


def _fit(x: np.ndarray, v: np.ndarray, sign: float, window, kind) -> FitResult:
    y = np.log(np.abs(v))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return FitResult(
        exponent=float(-slope),
        coefficient=float(sign * math.exp(intercept)),
        window=(int(window[0]), int(window[1])),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        points=int(x.size),
        kind=kind,
    )


def fit_power_exponent(series: DeviationSeries, window=None) -> FitResult:
    """Fit |value| ~ coefficient * n^(-exponent) on the window.

    Straight least squares through (log n, log |value|); refuses windows
    containing zeros or a sign change.
    """
    if window is None:
        window = (int(series.grid[-1]) // 100, int(series.grid[-1]))
    n, v, sign = _windowed(series, window)
    return _fit(np.log(n), v, sign, window, DecayKind.POWER_OF_N)


def fit_log_exponent(series: DeviationSeries, window=None) -> FitResult:
    """Fit |value| ~ coefficient * (log n)^(-exponent); for the critical
    series, whose decay is slower than any power of n."""
    if series.normalization is not Normalization.CRITICAL:
        raise ValidationError("log-rate fits apply to critical series")
    if window is None:
        window = (int(series.grid[-1]) // 100, int(series.grid[-1]))
    n, v, sign = _windowed(series, window)
    if window[0] < 3:
        raise ValidationError("log-rate fits need a window at n >= 3")
    return _fit(np.log(np.log(n)), v, sign, window, DecayKind.POWER_OF_LOG_N)


@dataclass(frozen=True)
class ScanCell:
    """One (alpha, order) cell of the crossover table."""

    alpha: Fraction
    order: int
    gamma_predicted: Optional[float]
    coefficient_predicted: Optional[float]
    gamma_hat: Optional[float] = None
    coefficient_hat: Optional[float] = None
    residual_rms: Optional[float] = None
    flag: str = ""


def crossover_scan(
    alpha_grid: Sequence = DEFAULT_ALPHA_GRID,
    orders: Sequence[int] = DEFAULT_ORDERS,
    n_max: int = 10**6,
    beta=Fraction(1),
    window=None,
    per_decade: int = 40,
) -> list[ScanCell]:
    """Fit every (alpha, order) cell and pair it with its predicted law.

    Identically-zero cells (order 2 at alpha = 0 and alpha = -1/2; odd
    orders when beta = 0) are emitted with a flag instead of a fit, and
    per-cell fit refusals are recorded the same way.
    """
    orders = sorted(set(int(k) for k in orders))
    if not orders or orders[0] < 1 or orders[-1] > 12:
        raise ValidationError("orders must lie within 1..12")
    alphas = [Fraction(a) for a in alpha_grid]
    for a in alphas:
        if not -1 < a < Fraction(1, 2):
            raise ValidationError(
                f"scan grid must lie inside (-1, 1/2), got alpha={a}"
            )
    if window is None:
        window = (n_max // 100, n_max)
    even_orders = [k for k in orders if k % 2 == 0]
    odd_orders = [k for k in orders if k % 2 == 1]
    from .deviations import default_grid

    grid = default_grid(n_max, per_decade=per_decade)
    cells: list[ScanCell] = []
    for alpha in alphas:
        params = ErwParams(alpha, beta)
        series: dict[int, DeviationSeries] = {}
        if even_orders:
            series.update(
                deviations_even_family(params, max(even_orders), n_max, grid)
            )
        if odd_orders and beta != 0:
            series.update(
                deviations_odd_family(params, max(odd_orders), n_max, grid)
            )
        for order in orders:
            pred = predict_rate(params, order)
            if pred.identically_zero:
                cells.append(
                    ScanCell(
                        alpha=alpha, order=order,
                        gamma_predicted=None, coefficient_predicted=None,
                        flag="identically-zero",
                    )
                )
                continue
            cell_kwargs = dict(
                alpha=alpha, order=order,
                gamma_predicted=pred.power_exponent,
                coefficient_predicted=pred.coefficient,
            )
            try:
                fit = fit_power_exponent(series[order], window)
            except DegenerateSeriesError as exc:
                cells.append(ScanCell(flag=f"fit-refused: {exc}", **cell_kwargs))
                continue
            cells.append(
                ScanCell(
                    gamma_hat=fit.exponent,
                    coefficient_hat=fit.coefficient,
                    residual_rms=fit.residual_rms,
                    **cell_kwargs,
                )
            )
    return cells


def scan_to_csv(cells: Sequence[ScanCell], fh) -> None:
    """Write the crossover table; one row per (alpha, order) cell."""
    w = csv.writer(fh)
    w.writerow(
        ["alpha", "order", "gamma_hat", "gamma_predicted",
         "coefficient_hat", "coefficient_predicted", "flags"]
    )

    def fmt(x):
        return "" if x is None else format(float(x), ".17g")

    for c in cells:
        w.writerow(
            [str(c.alpha), c.order, fmt(c.gamma_hat), fmt(c.gamma_predicted),
             fmt(c.coefficient_hat), fmt(c.coefficient_predicted), c.flag]
        )
