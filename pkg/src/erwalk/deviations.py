"""Normalized moment deviations, computed by their own recursions.

For order k and time n the deviation is

    M_n(k) = E[(S_n / scale_n)^k] / mu_k  -  1,

with scale_n = sqrt(n/(1-2a)) below the critical memory strength and
sqrt(n log n) at it (mu_k is the normal moment; odd orders carry no "-1"
since their normal moments vanish).  At n = 10^6 the raw 2m-th moment
exceeds 10^{6m} while the deviation is 10^{-1}..10^{-6}, so deviations are
never formed as (huge moment) - (huge reference).  Instead:

* even, subcritical: the first-order linear system
  M_{n+1} = f_n + h_n + g_n M_n, where f couples to lower even orders,
  g = (n/(n+1))^m (1 + 2m a/n), and h is the inhomogeneity evaluated from
  its exact definition (a short polynomial after symbolic cancellation);
* even, critical: the rescaled raw moments L_n = E[(S_n)^{2m}]/C(n+m-1, n-1)
  accumulate by positive increments, with M = L/t - 1 for the explicit
  normalizer t, plus the three-way decomposition of M into a constant part,
  a normalization part, and a lower-order coupling part;
* odd: the float moment path divided by the normalization (no
  cancellation: odd normal moments are zero).

Linear recursions are solved by the one-pass product/sum representation

    x_n = x_{j0+1} * prod_{k>j0}^{n-1} g_k + sum_j f_j * prod_{k>j}^{n-1} g_k,

with the start index j0 shifted past any zero of g (which happens exactly
when the relevant multiple of alpha is a negative integer) and the pre-j0
values taken from the exact rational moments.  Accumulations run in
extended precision (80-bit long double).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from . import moments
from .core import (
    ErwParams,
    ValidationError,
    double_factorial,
    gamma_ratio,
    product_asymptote,
    reciprocal_gamma,
)

__all__ = [
    "Normalization",
    "DeviationSeries",
    "SubcriticalCoefficients",
    "CriticalDecomposition",
    "default_grid",
    "solve_first_order_recursion",
    "second_moment_deviation",
    "second_moment_deviation_exact",
    "deviations_subcritical",
    "deviations_critical",
    "deviations_odd",
    "deviations_even_family",
    "even_drift_term",
]


class Normalization(Enum):
    SUBCRITICAL = "subcritical"  # divide S_n by sqrt(n/(1-2a))
    CRITICAL = "critical"        # divide S_n by sqrt(n log n)


@dataclass(frozen=True)
class SubcriticalCoefficients:
    """Recursion coefficients sampled on the grid (even subcritical orders).

    multiplier g is positive past the start offset; drift_solution is the
    part of the deviation driven by the inhomogeneity alone.
    """

    coupling: np.ndarray        # f_n
    multiplier: np.ndarray      # g_n
    drift: np.ndarray           # h_n
    drift_solution: np.ndarray  # accumulated drift contribution


@dataclass(frozen=True)
class CriticalDecomposition:
    """Three-way split of the critical deviation, sampled on the grid.

    constant_part + normalization_part + coupling_part equals the deviation
    identically; scaled_moments holds the rescaled raw moments themselves.
    """

    constant_part: np.ndarray
    normalization_part: np.ndarray
    coupling_part: np.ndarray
    scaled_moments: np.ndarray


@dataclass(frozen=True)
class DeviationSeries:
    """A deviation trajectory sampled on an increasing time grid."""

    params: ErwParams
    order: int
    grid: np.ndarray
    values: np.ndarray
    normalization: Normalization
    diagnostics: object = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or values.shape != grid.shape:
            raise ValidationError("grid and values must be 1-d and aligned")
        if grid.size and np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("deviation values must be finite")
        is_critical = self.params.alpha == Fraction(1, 2)
        if (self.normalization is Normalization.CRITICAL) != is_critical:
            raise ValidationError(
                "critical normalization is used exactly when alpha = 1/2"
            )

    def value_at(self, n: int) -> float:
        idx = np.searchsorted(self.grid, n)
        if idx >= self.grid.size or self.grid[idx] != n:
            raise KeyError(f"time {n} not on the grid")
        return float(self.values[idx])

    def to_csv(self, fh) -> None:
        """Write columns n, order, value, normalization."""
        w = csv.writer(fh)
        w.writerow(["n", "order", "value", "normalization"])
        for n, v in zip(self.grid, self.values):
            w.writerow([int(n), self.order, format(float(v), ".17g"),
                        self.normalization.value])


def default_grid(n_max: int, per_decade: int = 40, n_min: int = 2) -> np.ndarray:
    """Geometric time grid, roughly ``per_decade`` points per decade.

    Always contains n_min and n_max exactly.
    """
    if n_max < n_min:
        raise ValidationError(f"n_max={n_max} below n_min={n_min}")
    decades = math.log10(n_max / n_min)
    count = max(2, int(round(per_decade * decades)) + 1)
    pts = np.rint(
        np.logspace(math.log10(n_min), math.log10(n_max), count)
    ).astype(np.int64)
    tens = 10 ** np.arange(
        math.ceil(math.log10(n_min)), math.floor(math.log10(n_max)) + 1, dtype=np.int64
    )
    pts = np.unique(np.concatenate([pts, tens, [n_min, n_max]]))
    return pts[(pts >= n_min) & (pts <= n_max)]


def _check_grid(grid, n_max: int, n_min: int = 1) -> np.ndarray:
    grid = default_grid(n_max, n_min=n_min) if grid is None else np.asarray(
        grid, dtype=np.int64
    )
    if grid.size == 0:
        raise ValidationError("empty grid")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be strictly increasing")
    if grid[0] < n_min or grid[-1] > n_max:
        raise ValidationError(f"grid must lie within [{n_min}, {n_max}]")
    return grid


# ---------------------------------------------------------------------------
# generic first-order solver
# ---------------------------------------------------------------------------

def solve_first_order_recursion(
    x_start: float,
    f_seq: np.ndarray,
    g_seq: np.ndarray,
    j0: int = 0,
) -> np.ndarray:
    """Solve x_{n+1} = f_n + g_n x_n with x_{j0+1} = x_start, in one pass.

    ``f_seq`` and ``g_seq`` are indexed by j = j0+1, ..., j0+len(f_seq); the
    result holds x_n for n = j0+1, ..., j0+len(f_seq)+1.  A running product
    of the multipliers is maintained incrementally, so every g must be
    nonzero past j0.
    """
    f = np.asarray(f_seq, dtype=np.float64)
    g = np.asarray(g_seq, dtype=np.float64)
    if f.shape != g.shape or f.ndim != 1:
        raise ValidationError("f_seq and g_seq must be 1-d and aligned")
    if np.any(g == 0.0):
        raise ValidationError("multiplier sequence hits zero past the offset j0")
    x, _ = _solve_linear(np.longdouble(x_start), f, g)
    return x.astype(np.float64)


def _solve_linear(x_start, f: np.ndarray, g: np.ndarray):
    """Shared kernel: returns (x over n = start..start+len(f), gbar)."""
    count = f.shape[0] + 1
    gbar = np.empty(count, dtype=np.longdouble)
    gbar[0] = 1.0
    np.cumprod(g.astype(np.longdouble), out=gbar[1:])
    acc = np.empty(count, dtype=np.longdouble)
    acc[0] = 0.0
    np.cumsum(f.astype(np.longdouble) / gbar[1:], out=acc[1:])
    acc += x_start
    acc *= gbar
    return acc, gbar


# ---------------------------------------------------------------------------
# second order, closed forms
# ---------------------------------------------------------------------------

def second_moment_deviation(params: ErwParams, n: int) -> float:
    """Deviation of the second moment, -Gamma(n+2a)/(Gamma(n+1) Gamma(2a)).

    The vanishing-reciprocal-gamma convention makes this exactly 0 for
    a = 0 (all n) and for a = -1/2 (n >= 2).  Requires a < 1/2.
    """
    if params.alpha >= Fraction(1, 2):
        raise ValidationError("second-moment deviation closed form needs alpha < 1/2")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if n == 1:
        return float(-2 * params.alpha)
    a = float(params.alpha)
    rg = reciprocal_gamma(2 * a)
    if rg == 0.0:
        return 0.0
    return -gamma_ratio(2 * a, 1.0, n) * rg


def second_moment_deviation_exact(params: ErwParams, n: int) -> Fraction:
    """Exact rational second-moment deviation, -(2a/n) prod_{j<n}(1 + 2a/j)."""
    if params.alpha >= Fraction(1, 2):
        raise ValidationError("second-moment deviation closed form needs alpha < 1/2")
    from .core import drift_scale_exact

    two_a = 2 * params.alpha
    return Fraction(-two_a, n) * drift_scale_exact(two_a, n)


# ---------------------------------------------------------------------------
# even orders, subcritical
# ---------------------------------------------------------------------------

def _drift_polynomial(params: ErwParams, m: int) -> list[Fraction]:
    """Coefficients p_0..p_{m-1} with h_n = P(n) / (n (n+1)^m).

    P is the exact numerator of the inhomogeneity after clearing
    denominators; its two top-degree coefficients cancel identically, which
    is asserted (that cancellation is why h = O(n^{-2})).
    """
    alpha = params.alpha
    one_minus = 1 - 2 * alpha
    dfm = double_factorial(2 * m - 1)
    coeffs = [Fraction(0)] * (m + 2)  # degrees 0..m+1
    coeffs[1] += Fraction(one_minus**m, dfm)
    for ell in range(1, m + 1):
        r = Fraction(double_factorial(2 * ell - 1), dfm) * one_minus ** (m - ell)
        coeffs[ell + 1] += math.comb(2 * m, 2 * ell) * r
        coeffs[ell] += alpha * math.comb(2 * m, 2 * ell - 1) * r
    for i in range(m + 1):
        coeffs[i + 1] -= math.comb(m, i)
    assert coeffs[m + 1] == 0 and coeffs[m] == 0, "drift numerator failed to cancel"
    return coeffs[:m]


def even_drift_term(params: ErwParams, order: int, n) -> np.ndarray | float:
    """The inhomogeneity h_n of the even-order deviation recursion.

    Evaluated from its exact definition via the cancelled numerator
    polynomial, so no precision is lost to the 1 - (1 + O(1/n)) subtraction.
    Scalar n gives a scalar; arrays broadcast.
    """
    m = _even_order_to_m(order)
    if params.alpha >= Fraction(1, 2):
        raise ValidationError("drift term is defined for alpha < 1/2")
    coeffs = _drift_polynomial(params, m)
    nn = np.asarray(n, dtype=np.float64)
    p = np.zeros_like(nn)
    for c in reversed(coeffs):
        p = p * nn + float(c)
    out = p / (nn * (nn + 1.0) ** m)
    return out if out.shape else float(out)


def _even_order_to_m(order: int) -> int:
    if order < 2 or order % 2 != 0:
        raise ValidationError(f"even order required, got {order}")
    return order // 2


def _exact_subcritical_deviation(params: ErwParams, n: int, m: int) -> Fraction:
    mv = moments.moments_at(params, n, 2 * m)
    one_minus = 1 - 2 * params.alpha
    scale = Fraction(n, 1) ** m / one_minus**m * double_factorial(2 * m - 1)
    return mv[2 * m] / scale - 1


def deviations_subcritical(
    params: ErwParams,
    order: int,
    n_max: int,
    grid: Optional[Sequence[int]] = None,
) -> DeviationSeries:
    """Even-order deviation series for alpha < 1/2; see the module docstring."""
    if params.alpha == Fraction(1, 2):
        raise ValidationError("alpha = 1/2 needs the critical variant")
    return deviations_even_family(params, order, n_max, grid)[order]


def deviations_even_family(
    params: ErwParams,
    max_order: int,
    n_max: int,
    grid: Optional[Sequence[int]] = None,
) -> Dict[int, DeviationSeries]:
    """All even deviation series 2, 4, ..., max_order in one joint pass."""
    m_top = _even_order_to_m(max_order)
    if params.alpha > Fraction(1, 2):
        raise ValidationError(
            "deviations cover alpha <= 1/2 only; the strongly reinforced "
            "regime has no moment-rate law here"
        )
    if params.alpha == Fraction(1, 2):
        return _critical_family(params, m_top, n_max, grid)
    return _subcritical_family(params, m_top, n_max, grid)


def _subcritical_family(params, m_top, n_max, grid) -> Dict[int, DeviationSeries]:
    grid = _check_grid(grid, n_max)
    alpha = params.alpha
    a = float(alpha)
    oz = 1.0 - 2.0 * a
    j_all = np.arange(1, n_max + 1, dtype=np.float64)
    full: Dict[int, np.ndarray] = {}
    out: Dict[int, DeviationSeries] = {}
    for m in range(1, m_top + 1):
        j0, _ = product_asymptote(2 * m * alpha)
        if j0 + 1 >= n_max:
            raise ValidationError(f"n_max={n_max} too small for order {2*m}")
        j = j_all[j0:]  # j0+1 .. n_max inclusive; the last entry only feeds
        ratio = j / (j + 1.0)  # the grid diagnostics, not the solver
        g = ratio**m * (1.0 + (2 * m * a) / j)
        h = np.asarray(even_drift_term(params, 2 * m, j))
        f = np.zeros_like(j)
        dfm = double_factorial(2 * m - 1)
        for ell in range(1, m):
            w = math.comb(2 * m, 2 * ell) + (a / j) * math.comb(2 * m, 2 * ell - 1)
            s_ratio = (
                double_factorial(2 * ell - 1)
                / dfm
                * oz ** (m - ell)
                * ratio**ell
                / (j + 1.0) ** (m - ell)
            )
            f += w * s_ratio * full[2 * ell][j0 + 1 :]
        x_start = float(_exact_subcritical_deviation(params, j0 + 1, m))
        x, gbar = _solve_linear(np.longdouble(x_start), (f + h)[:-1], g[:-1])
        drift_sol, _ = _solve_linear(np.longdouble(0.0), h[:-1], g[:-1])
        arr = np.full(n_max + 1, np.nan)
        arr[j0 + 1 :] = x.astype(np.float64)
        for k in range(1, j0 + 1):
            arr[k] = float(_exact_subcritical_deviation(params, k, m))
        full[2 * m] = arr
        drift_full = np.full(n_max + 1, np.nan)
        drift_full[j0 + 1 :] = drift_sol.astype(np.float64)
        # diagnostics sampled on the grid; f/g/h are defined for n > j0
        def sample(vec, offset):
            res = np.full(grid.shape, np.nan)
            ok = grid >= offset
            res[ok] = vec[grid[ok] - offset]
            return res

        diag = SubcriticalCoefficients(
            coupling=sample(f, j0 + 1),
            multiplier=sample(g, j0 + 1),
            drift=sample(h, j0 + 1),
            drift_solution=drift_full[grid].copy(),
        )
        out[2 * m] = DeviationSeries(
            params=params,
            order=2 * m,
            grid=grid,
            values=arr[grid],
            normalization=Normalization.SUBCRITICAL,
            diagnostics=diag,
        )
    return out


# ---------------------------------------------------------------------------
# even orders, critical
# ---------------------------------------------------------------------------

def deviations_critical(
    params: ErwParams,
    order: int,
    n_max: int,
    grid: Optional[Sequence[int]] = None,
) -> DeviationSeries:
    """Even-order deviation series at alpha = 1/2 exactly."""
    if params.alpha != Fraction(1, 2):
        raise ValidationError("critical deviations require alpha = 1/2 exactly")
    m = _even_order_to_m(order)
    return _critical_family(params, m, n_max, grid)[order]


def _log_binomial(top: np.ndarray, k: int) -> np.ndarray:
    """C(top, k) for integer arrays via log-gamma."""
    return np.exp(gammaln(top + 1.0) - gammaln(top - k + 1.0) - math.lgamma(k + 1.0))


def _critical_family(params, m_top, n_max, grid) -> Dict[int, DeviationSeries]:
    if params.alpha != Fraction(1, 2):
        raise ValidationError("critical deviations require alpha = 1/2 exactly")
    grid = _check_grid(grid, n_max, n_min=2)
    j = np.arange(1, n_max, dtype=np.float64)
    logj = np.log(j)
    grid_f = grid.astype(np.float64)
    log_grid = np.log(grid_f)
    scaled: Dict[int, np.ndarray] = {}   # L arrays indexed by time
    raw: Dict[int, np.ndarray] = {}      # E[(S_j)^{2l}] over j = 1..n_max-1
    out: Dict[int, DeviationSeries] = {}
    for m in range(1, m_top + 1):
        dfm = double_factorial(2 * m - 1)
        inv_choose = 1.0 / _log_binomial(j + m, m)  # 1/C(j+m, j)
        inc_const = inv_choose.copy()
        inc_norm = np.zeros_like(j)
        inc_coupling = np.zeros_like(j)
        for ell in range(1, m):
            w = math.comb(2 * m, 2 * ell) + math.comb(2 * m, 2 * ell - 1) / (2.0 * j)
            t_j = (j * logj) ** ell * double_factorial(2 * ell - 1)
            inc_norm += w * inv_choose * t_j
            inc_coupling += w * inv_choose * (raw[2 * ell] - t_j)
        acc = np.empty((4, n_max), dtype=np.longdouble)
        acc[:, 0] = 0.0
        np.cumsum((inc_const + inc_norm + inc_coupling).astype(np.longdouble),
                  out=acc[0, 1:])
        np.cumsum(inc_const.astype(np.longdouble), out=acc[1, 1:])
        np.cumsum(inc_norm.astype(np.longdouble), out=acc[2, 1:])
        np.cumsum(inc_coupling.astype(np.longdouble), out=acc[3, 1:])
        L = 1.0 + acc[0].astype(np.float64)  # L[i] is the value at time i+1
        scaled[2 * m] = L
        raw[2 * m] = _log_binomial(j + (m - 1), m) * L[: n_max - 1]
        t_grid = (
            (grid_f * log_grid) ** m
            * dfm
            / _log_binomial(grid_f + (m - 1), m)
        )
        L_grid = L[grid - 1]
        values = L_grid / t_grid - 1.0
        head = (1.0 + acc[1, grid - 1].astype(np.float64)) / t_grid
        norm_part = (acc[2, grid - 1].astype(np.float64)) / t_grid - 1.0
        coupling_part = (acc[3, grid - 1].astype(np.float64)) / t_grid
        diag = CriticalDecomposition(
            constant_part=head,
            normalization_part=norm_part,
            coupling_part=coupling_part,
            scaled_moments=L_grid,
        )
        out[2 * m] = DeviationSeries(
            params=params,
            order=2 * m,
            grid=grid,
            values=values,
            normalization=Normalization.CRITICAL,
            diagnostics=diag,
        )
    return out


# ---------------------------------------------------------------------------
# odd orders
# ---------------------------------------------------------------------------

def deviations_odd(
    params: ErwParams,
    order: int,
    n_max: int,
    grid: Optional[Sequence[int]] = None,
) -> DeviationSeries:
    """Odd-order normalized moments E[(S_n/scale_n)^k].

    These are the deviations themselves (odd normal moments vanish): the
    float moment path divided by the applicable normalization.  Identically
    zero when beta = 0.
    """
    return deviations_odd_family(params, order, n_max, grid)[order]


def deviations_odd_family(
    params: ErwParams,
    max_order: int,
    n_max: int,
    grid: Optional[Sequence[int]] = None,
) -> Dict[int, DeviationSeries]:
    """All odd deviation series 1, 3, ..., max_order from one moment pass."""
    if max_order < 1 or max_order % 2 == 0:
        raise ValidationError(f"odd order required, got {max_order}")
    if params.alpha > Fraction(1, 2):
        raise ValidationError("deviations cover alpha <= 1/2 only")
    critical = params.alpha == Fraction(1, 2)
    grid = _check_grid(grid, n_max, n_min=2 if critical else 1)
    orders = list(range(1, max_order + 1, 2))
    series = moments.moments_float(params, orders, n_max)
    grid_f = grid.astype(np.float64)
    if critical:
        scale = grid_f * np.log(grid_f)
        norm = Normalization.CRITICAL
    else:
        scale = grid_f / (1.0 - 2.0 * float(params.alpha))
        norm = Normalization.SUBCRITICAL
    out = {}
    for order in orders:
        values = series[order][grid] / scale ** (order / 2.0)
        out[order] = DeviationSeries(
            params=params,
            order=order,
            grid=grid,
            values=values,
            normalization=norm,
            diagnostics=None,
        )
    return out
