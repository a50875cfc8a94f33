"""Closed-form rate predictions and normal-approximation bound shapes.

Every leading-order law that the deviation engine and the Monte Carlo are
tested against lives here as an evaluable formula: the decay law of each
normalized moment (coefficient plus a power of n or of log n), the
three-regime variance asymptote, the shapes of the Berry-Esseen bounds
(whose absolute constants are deliberately not estimated), and the direct
summations used to sanity-check the bound derivation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import (
    ErwParams,
    EULER_GAMMA,
    Regime,
    ValidationError,
    double_factorial,
    even_rate_constant,
    gamma_ratio,
    reciprocal_gamma,
    regime_of,
)

__all__ = [
    "DecayKind",
    "RatePrediction",
    "predict_rate",
    "variance_asymptote",
    "clt_scale",
    "berry_esseen_shape",
    "martingale_variance_sums",
    "wendel_bounds",
    "log_power_sum",
    "partial_sum_ratio",
]

HALF = Fraction(1, 2)


class DecayKind(Enum):
    POWER_OF_N = "power_of_n"
    POWER_OF_LOG_N = "power_of_log_n"


@dataclass(frozen=True)
class RatePrediction:
    """Leading term of one normalized-moment deviation.

    The deviation behaves like coefficient * n^(-exponent) (or
    coefficient * (log n)^(-exponent) at the critical memory strength).
    ``identically_zero`` marks the exceptional branches where the deviation
    vanishes outright instead of decaying.
    """

    order: int
    regime: Regime
    coefficient: float
    decay: DecayKind
    exponent: float
    identically_zero: bool = False
    note: str = ""

    def evaluate(self, n) -> np.ndarray | float:
        """The predicted deviation at time(s) n."""
        if self.identically_zero:
            return np.zeros_like(np.asarray(n, dtype=float))
        n = np.asarray(n, dtype=float)
        base = np.log(n) if self.decay is DecayKind.POWER_OF_LOG_N else n
        out = self.coefficient * base**-self.exponent
        return out if out.shape else float(out)

    @property
    def power_exponent(self) -> Optional[float]:
        """Exponent of the n-power law, None at the critical point."""
        return None if self.decay is DecayKind.POWER_OF_LOG_N else self.exponent


def predict_rate(params: ErwParams, k: int) -> RatePrediction:
    """Leading decay law of the order-k normalized moment deviation.

    Covers -1 < alpha <= 1/2.  Odd orders with beta = 0 and the two
    second-order knife edges (alpha = 0; alpha = -1/2 from n = 2 on) come
    back flagged identically zero.
    """
    if k < 1:
        raise ValidationError(f"order must be >= 1, got {k}")
    alpha, beta = params.alpha, params.beta
    if alpha > HALF:
        raise ValidationError(
            "rate predictions cover alpha <= 1/2 only; beyond that the "
            "normalized moments converge to non-normal limits"
        )
    regime = regime_of(alpha)
    a, b = float(alpha), float(beta)
    if k % 2 == 1:
        m = (k + 1) // 2
        if beta == 0:
            return RatePrediction(
                order=k, regime=regime, coefficient=0.0,
                decay=DecayKind.POWER_OF_N, exponent=0.0,
                identically_zero=True, note="odd moments vanish when beta = 0",
            )
        if regime is Regime.CRITICAL:
            coeff = 2.0 * b / math.sqrt(math.pi) * double_factorial(2 * m - 1)
            return RatePrediction(k, regime, coeff, DecayKind.POWER_OF_LOG_N, 0.5)
        coeff = (
            b * math.sqrt(1.0 - 2 * a) * reciprocal_gamma(1.0 + a)
            * double_factorial(2 * m - 1)
        )
        return RatePrediction(k, regime, coeff, DecayKind.POWER_OF_N, (1.0 - 2 * a) / 2)
    m = k // 2
    if regime is Regime.CRITICAL:
        return RatePrediction(k, regime, m * EULER_GAMMA, DecayKind.POWER_OF_LOG_N, 1.0)
    if k == 2:
        if alpha == 0 or alpha == Fraction(-1, 2):
            return RatePrediction(
                order=k, regime=regime, coefficient=0.0,
                decay=DecayKind.POWER_OF_N, exponent=0.0, identically_zero=True,
                note="exactly zero for all n" if alpha == 0 else "exactly zero from n = 2",
            )
        return RatePrediction(
            k, regime, -reciprocal_gamma(2 * a), DecayKind.POWER_OF_N, 1.0 - 2 * a
        )
    if alpha <= 0:
        coeff = m * (m - 1) / 2.0 * float(even_rate_constant(alpha))
        return RatePrediction(k, regime, coeff, DecayKind.POWER_OF_N, 1.0)
    return RatePrediction(
        k, regime, -m * reciprocal_gamma(2 * a), DecayKind.POWER_OF_N, 1.0 - 2 * a
    )


def variance_asymptote(params: ErwParams, n: int) -> float:
    """Leading behavior of E[(S_n)^2]: n/(1-2a), n log n, or the
    reinforced-growth branch n^{2a}/((2a-1) Gamma(2a))."""
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n}")
    a = float(params.alpha)
    regime = params.regime
    if regime is Regime.DIFFUSIVE:
        return n / (1.0 - 2 * a)
    if regime is Regime.CRITICAL:
        return n * math.log(n)
    return n ** (2 * a) * reciprocal_gamma(2 * a) / (2 * a - 1.0)


def clt_scale(params: ErwParams, n: int) -> float:
    """The normalization sqrt(variance asymptote); what S_n is divided by."""
    return math.sqrt(variance_asymptote(params, n))


def berry_esseen_shape(params: ErwParams, n: int) -> float:
    """Shape of the normal-approximation error bound, constant stripped.

    log n / sqrt(n) for alpha <= 0, log n / n^{(1-2a)/2} for
    0 <= alpha < 1/2 (the two branches agree at 0), and
    log log n / sqrt(log n) at alpha = 1/2.  The unspecified constants are
    never estimated; only the shape is exposed.
    """
    if n < 3:
        raise ValidationError(f"n must be >= 3, got {n}")
    alpha = params.alpha
    if alpha > HALF:
        raise ValidationError("bound shapes cover alpha <= 1/2 only")
    if alpha == HALF:
        return math.log(math.log(n)) / math.sqrt(math.log(n))
    a = max(0.0, float(alpha))
    return math.log(n) / n ** ((1.0 - 2 * a) / 2)


def martingale_variance_sums(params: ErwParams, n: int) -> tuple[float, float]:
    """(direct, normalized) variance sums behind the bound derivation.

    direct     = sum_{i<=n} (Gamma(i)/Gamma(i+a))^2, term-by-term log-gamma;
    normalized = (Gamma(n)/Gamma(n+a))^2 * n/(1-2a)   for a < 1/2,
                 (Gamma(n)/Gamma(n+a))^2 * n log n     at a = 1/2.

    The ratio sqrt(direct/normalized) tends to 1 at rate n^-1, n^{2a-1}, or
    1/log n depending on the sign of a.
    """
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n}")
    alpha = params.alpha
    if not (0 < alpha <= HALF or -1 < alpha < 0):
        raise ValidationError(
            f"variance sums are defined for alpha in (-1,0) or (0,1/2], got {alpha}"
        )
    from scipy.special import gammaln as _gammaln

    a = float(alpha)
    i = np.arange(1, n + 1, dtype=np.float64)
    terms = np.exp(2.0 * (_gammaln(i) - _gammaln(i + a)))
    direct = float(np.sum(terms.astype(np.longdouble)))
    tail = gamma_ratio(0.0, a, n) ** 2
    if alpha == HALF:
        normalized = tail * n * math.log(n)
    else:
        normalized = tail * n / (1.0 - 2 * a)
    return direct, normalized


def wendel_bounds(x: float, alpha: float) -> tuple[float, float, float]:
    """(lower, value, upper) for the sandwich
    (x/(x+a))^(1-a) <= Gamma(x+a)/(x^a Gamma(x)) <= 1, for a in (0,1)."""
    if not 0 < alpha < 1:
        raise ValidationError(f"Wendel sandwich needs alpha in (0,1), got {alpha}")
    if x <= 0:
        raise ValidationError(f"x must be positive, got {x}")
    value = math.exp(math.lgamma(x + alpha) - math.lgamma(x) - alpha * math.log(x))
    lower = (x / (x + alpha)) ** (1.0 - alpha)
    return lower, value, 1.0


def log_power_sum(m: int, n: int) -> float:
    """(m/(log n)^m) * sum_{j<=n} (log j)^{m-1}/j; tends to 1 like
    1 + O((log n)^-m)."""
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n}")
    j = np.arange(1, n + 1, dtype=np.float64)
    logs = np.log(j)
    terms = logs ** (m - 1) / j
    if m == 1:
        terms[0] = 1.0  # (log 1)^0 = 1
    total = float(np.sum(terms.astype(np.longdouble)))
    return m * total / math.log(n) ** m


def partial_sum_ratio(a_seq: np.ndarray, b_seq: np.ndarray) -> float:
    """Ratio of partial sums; tends to lim a_n/b_n when sum b diverges
    (the discrete l'Hopital rule used throughout the summation estimates)."""
    a = np.asarray(a_seq, dtype=np.longdouble)
    b = np.asarray(b_seq, dtype=np.longdouble)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValidationError("sequences must be 1-d, nonempty, aligned")
    return float(np.sum(a) / np.sum(b))
