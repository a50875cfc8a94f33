"""Model parameters and gamma-function utilities for the elephant random walk.

The walk has two parameters: a memory parameter ``alpha`` in (-1, 1) and a
first-step bias ``beta`` in [-1, 1].  Equivalently ``p = (1 + alpha)/2`` is
the probability of repeating a remembered step and ``q = (1 + beta)/2`` the
probability that the first step goes right.  Both are carried as exact
rationals end-to-end so that the knife-edge cases (alpha = 0, -1/2, 1/2,
beta = 0) are decided by exact equality, never by floating comparison.

All gamma-ratio evaluations go through log-gamma so that they stay finite
for times up to 10^6 and beyond.  The reciprocal gamma function uses the
convention 1/Gamma(s) = 0 at s = 0, -1, -2, ..., which is what produces the
identically-zero branches of the second-moment deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

Rational = Union[Fraction, int]

#: Euler-Mascheroni constant, 20 digits.
EULER_GAMMA = 0.57721566490153286061


class ValidationError(ValueError):
    """Raised when parameters fall outside their documented domain."""


class ResourceLimitError(RuntimeError):
    """Raised when a computation would exceed a configured resource cap."""


class Regime(Enum):
    """Diffusive phase of the walk, a pure function of alpha."""

    DIFFUSIVE = "diffusive"          # alpha < 1/2
    CRITICAL = "critical"            # alpha == 1/2 exactly
    SUPERDIFFUSIVE = "superdiffusive"  # alpha > 1/2


def _as_fraction(x, name: str) -> Fraction:
    if isinstance(x, float):
        raise ValidationError(
            f"{name} must be an exact rational (Fraction, int, or 'p/q' "
            f"string), got float {x!r}; floats cannot represent the "
            f"knife-edge values exactly"
        )
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot interpret {name}={x!r} as a rational") from exc


@dataclass(frozen=True)
class ErwParams:
    """Exact model parameters.

    alpha: memory parameter, strictly inside (-1, 1).
    beta:  first-step bias, in [-1, 1].
    """

    alpha: Fraction
    beta: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_fraction(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _as_fraction(self.beta, "beta"))
        if not (-1 < self.alpha < 1):
            raise ValidationError(f"alpha must lie in (-1, 1), got {self.alpha}")
        if not (-1 <= self.beta <= 1):
            raise ValidationError(f"beta must lie in [-1, 1], got {self.beta}")

    @classmethod
    def from_pq(cls, p, q) -> "ErwParams":
        p = _as_fraction(p, "p")
        q = _as_fraction(q, "q")
        return cls(alpha=2 * p - 1, beta=2 * q - 1)

    @property
    def p(self) -> Fraction:
        """Probability of repeating the remembered step."""
        return (1 + self.alpha) / 2

    @property
    def q(self) -> Fraction:
        """Probability that the first step is +1."""
        return (1 + self.beta) / 2

    @property
    def regime(self) -> Regime:
        return regime_of(self.alpha)


def regime_of(alpha: Rational) -> Regime:
    """Classify alpha; the critical tag requires exact equality with 1/2."""
    alpha = Fraction(alpha)
    half = Fraction(1, 2)
    if alpha < half:
        return Regime.DIFFUSIVE
    if alpha == half:
        return Regime.CRITICAL
    return Regime.SUPERDIFFUSIVE


# ---------------------------------------------------------------------------
# gamma utilities
# ---------------------------------------------------------------------------

def _is_nonpositive_integer(s: float) -> bool:
    return s <= 0 and s == math.floor(s)


def reciprocal_gamma(s: float) -> float:
    """1/Gamma(s), with the value 0 at the poles s = 0, -1, -2, ...

    Total on the reals: the zero convention removes the poles and large
    positive arguments underflow gracefully to 0 through exp(-lgamma).
    """
    s = float(s)
    if _is_nonpositive_integer(s):
        return 0.0
    if s > 170.0:
        return math.exp(-math.lgamma(s))
    return 1.0 / math.gamma(s)


def _gamma_sign(x: float) -> int:
    # sign of Gamma on the real line, x not at a pole
    if x > 0:
        return 1
    return -1 if math.floor(-x) % 2 == 0 else 1


def gamma_ratio(a: float, b: float, n: int) -> float:
    """Gamma(n + a)/Gamma(n + b) through log-gamma.

    Approaches n**(a - b) as n grows.  Raises if either argument sits at a
    pole of the gamma function.
    """
    x, y = n + a, n + b
    for arg in (x, y):
        if _is_nonpositive_integer(arg):
            raise ValidationError(f"gamma pole at argument {arg} (n={n})")
    sign = _gamma_sign(x) * _gamma_sign(y)
    return sign * math.exp(math.lgamma(x) - math.lgamma(y))


def drift_scale_exact(alpha: Rational, n: int) -> Fraction:
    """prod_{j=1}^{n-1} (1 + alpha/j), exact; the empty product is 1.

    E[S_n] equals beta times this factor, and it grows like
    n^alpha / Gamma(1 + alpha).
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    alpha = Fraction(alpha)
    num = 1
    den = 1
    a_n, a_d = alpha.numerator, alpha.denominator
    for j in range(1, n):
        num *= j * a_d + a_n
        den *= j * a_d
    return Fraction(num, den)


def drift_scale(alpha: float, n: int) -> float:
    """Float version of :func:`drift_scale_exact`, via log-gamma.

    Equals Gamma(n + alpha)/(Gamma(n) Gamma(1 + alpha)); safe up to n ~ 1e9.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    a = float(alpha)
    return math.exp(math.lgamma(n + a) - math.lgamma(n) - math.lgamma(1.0 + a))


def product_asymptote(delta: Rational) -> tuple[int, float]:
    """Parameters (j0, A) of the law prod_{j>j0}^{n-1}(1 + delta/j) ~ A n^delta.

    When delta = -k for a positive integer k the first k factors hit zero,
    so the product must start after j0 = k and the limit constant is k!.
    Otherwise j0 = 0 and A = 1/Gamma(1 + delta).
    """
    delta = Fraction(delta)
    if delta < 0 and delta.denominator == 1:
        k = -int(delta)
        return k, float(math.factorial(k))
    return 0, reciprocal_gamma(1.0 + float(delta))


def normal_moment(k: int) -> int:
    """k-th moment of the standard normal: 0 for odd k, (2m-1)!! for k=2m."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k % 2 == 1:
        return 0
    return double_factorial(k - 1)


def double_factorial(k: int) -> int:
    """Product k(k-2)(k-4)...; equals 1 for k <= 0."""
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def even_rate_constant(alpha: Rational) -> Fraction:
    """The constant -2(2 alpha^2 + 1)/(3(1 - 4 alpha)) governing the n^{-1}
    decay of higher even-moment deviations for alpha <= 0.

    Only meaningful on (-1, 0]; alpha = 1/4 is a pole of the expression and
    is rejected unconditionally.
    """
    alpha = Fraction(alpha)
    if alpha == Fraction(1, 4):
        raise ValidationError("alpha = 1/4 is a pole of the rate constant")
    if alpha > 0:
        raise ValidationError(
            f"rate constant is defined for alpha <= 0 only, got {alpha}"
        )
    return Fraction(-2) * (2 * alpha**2 + 1) / (3 * (1 - 4 * alpha))
