"""Exact and floating-point moments of the walk position.

Two independent routes to E[(S_n)^k]:

* the coupled moment recursions, iterated in exact rational arithmetic
  (fast scaled-integer representation inside, Fractions outside), and
* brute-force enumeration of all 2^n sign paths with exact path
  probabilities, which serves as the ground-truth oracle for small n.

The recursions advance all orders 1..K jointly because each order couples
to every lower order of the same parity:

    E[(S_{n+1})^{2m-1}] = sum_l { C(2m-1,2l-1) + (a/n) C(2m-1,2l-2) } E[(S_n)^{2l-1}]
    E[(S_{n+1})^{2m}]   = 1 + sum_l { C(2m,2l) + (a/n) C(2m,2l-1) } E[(S_n)^{2l}]

A float path (same recursions, solved per order in one vectorized pass) is
provided for time horizons where rationals get too heavy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Sequence

import numpy as np

from .core import (
    ErwParams,
    ResourceLimitError,
    ValidationError,
    drift_scale_exact,
    product_asymptote,
)

#: Path enumeration is refused above this horizon (2^n paths).
BRUTE_FORCE_MAX_N = 14

#: Default cap on the bit size of the internal integer state.
DEFAULT_MAX_BITS = 1 << 22

#: Default largest moment order served by :func:`exact_moment`.
DEFAULT_MAX_ORDER = 12


@dataclass(frozen=True)
class MomentVector:
    """All moments E[(S_n)^k], k = 1..K, at a single time n."""

    n: int
    params: ErwParams
    values: Dict[int, Fraction]

    @property
    def max_order(self) -> int:
        return max(self.values)

    def __getitem__(self, k: int) -> Fraction:
        return self.values[k]


def initial_moments(params: ErwParams, K: int) -> MomentVector:
    """Moments at n = 1: the first step is +-1, so odd moments equal beta
    and even moments equal 1."""
    values = {k: (params.beta if k % 2 else Fraction(1)) for k in range(1, K + 1)}
    return MomentVector(n=1, params=params, values=values)


def step_moments(mv: MomentVector) -> MomentVector:
    """Advance a full moment vector from time n to n + 1.

    Requires every order 1..K with K even; the recursions couple downward
    within each parity class.
    """
    K = mv.max_order
    if K % 2 != 0:
        raise ValidationError(f"moment vector must hold an even top order, got K={K}")
    if set(mv.values) != set(range(1, K + 1)):
        raise ValidationError("moment vector must hold every order 1..K")
    alpha, n = mv.params.alpha, mv.n
    a_over_n = Fraction(alpha, n)
    out: Dict[int, Fraction] = {}
    for k in range(1, K + 1):
        if k % 2:
            m = (k + 1) // 2
            acc = Fraction(0)
            for ell in range(1, m + 1):
                w = math.comb(k, 2 * ell - 1) + a_over_n * math.comb(k, 2 * ell - 2)
                acc += w * mv.values[2 * ell - 1]
        else:
            m = k // 2
            acc = Fraction(1)
            for ell in range(1, m + 1):
                w = math.comb(k, 2 * ell) + a_over_n * math.comb(k, 2 * ell - 1)
                acc += w * mv.values[2 * ell]
        out[k] = acc
    return MomentVector(n=n + 1, params=mv.params, values=out)


def iter_moments(
    params: ErwParams,
    K: int,
    times: Iterable[int],
    max_bits: int = DEFAULT_MAX_BITS,
) -> Iterator[MomentVector]:
    """Yield MomentVectors at the given times in one forward pass.

    Internally the state is kept as integers W_k = E[(S_n)^k] * scale_n with
    scale_n = (n-1)! * den(alpha)^(n-1) * den(beta), so each step is a handful
    of small-integer multiplications and no gcd is ever taken until a vector
    is emitted.  ``max_bits`` caps the bit size of the scale factor.
    """
    times = sorted(set(int(t) for t in times))
    if not times:
        return
    if times[0] < 1:
        raise ValidationError(f"times must be >= 1, got {times[0]}")
    ad = params.alpha.denominator
    an = params.alpha.numerator
    bd = params.beta.denominator
    bn = params.beta.numerator
    # W[k-1] = E[S_n^k] * scale, scale = (n-1)! * ad^(n-1) * bd
    scale = bd
    W: List[int] = [(bn if k % 2 else bd) for k in range(1, K + 1)]
    combs = [[math.comb(k, i) for i in range(k + 1)] for k in range(K + 1)]
    target = iter(times)
    next_t = next(target)
    n = 1
    while True:
        if n == next_t:
            values = {k: Fraction(W[k - 1], scale) for k in range(1, K + 1)}
            yield MomentVector(n=n, params=params, values=values)
            try:
                next_t = next(target)
            except StopIteration:
                return
        if scale.bit_length() > max_bits:
            raise ResourceLimitError(
                f"rational state exceeded {max_bits} bits at n={n}; "
                f"raise max_bits or use the float path"
            )
        nd = n * ad
        newW = []
        for k in range(1, K + 1):
            ck = combs[k]
            if k % 2:
                acc = 0
                for ell in range(1, (k + 1) // 2 + 1):
                    acc += (ck[2 * ell - 1] * nd + an * ck[2 * ell - 2]) * W[2 * ell - 2]
            else:
                acc = scale * nd
                for ell in range(1, k // 2 + 1):
                    acc += (ck[2 * ell] * nd + an * ck[2 * ell - 1]) * W[2 * ell - 1]
            newW.append(acc)
        W = newW
        scale *= nd
        n += 1


def moments_at(
    params: ErwParams, n: int, K: int, max_bits: int = DEFAULT_MAX_BITS
) -> MomentVector:
    """Exact moment vector at time n, orders 1..K."""
    (mv,) = list(iter_moments(params, K, [n], max_bits=max_bits))
    return mv


def exact_moment(
    params: ErwParams,
    n: int,
    k: int,
    max_order: int = DEFAULT_MAX_ORDER,
    max_bits: int = DEFAULT_MAX_BITS,
) -> Fraction:
    """Exact rational E[(S_n)^k] by iterating the joint recursion from n = 1."""
    if not 1 <= k <= max_order:
        raise ValidationError(f"order k must lie in [1, {max_order}], got {k}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    K = k if k % 2 == 0 else k + 1
    return moments_at(params, n, K, max_bits=max_bits)[k]


def first_moment(params: ErwParams, n: int) -> Fraction:
    """E[S_n] = beta * prod_{j<n}(1 + alpha/j), exact."""
    return params.beta * drift_scale_exact(params.alpha, n)


def second_moment_closed_form(params: ErwParams, n: int) -> float:
    """Closed-form E[(S_n)^2] as a float.

    For alpha != 1/2 this is n/(1-2a) + Gamma(n+2a)/((2a-1) Gamma(n) Gamma(2a)),
    the gamma term grouped as (2a/(2a-1)) * Gamma(n+2a)/(Gamma(n) Gamma(1+2a))
    so that the vanishing-reciprocal-gamma convention kills it exactly at
    a = 0 and (for n >= 2) at a = -1/2.  For alpha = 1/2 it is n * H_n.
    n = 1 is the empty product: the second moment is identically 1.
    """
    from .core import gamma_ratio, reciprocal_gamma

    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if n == 1:
        return 1.0
    if params.alpha == Fraction(1, 2):
        from scipy.special import digamma

        from .core import EULER_GAMMA

        return n * float(digamma(n + 1) + EULER_GAMMA)
    a = float(params.alpha)
    rg = reciprocal_gamma(1.0 + 2 * a)
    val = n / (1.0 - 2 * a)
    if rg != 0.0:
        val += 2 * a / (2 * a - 1.0) * rg * gamma_ratio(2 * a, 0.0, n)
    return val


def second_moment_closed_form_exact(params: ErwParams, n: int) -> Fraction:
    """Rational evaluation of the closed-form second moment.

    Uses Gamma(n+2a)/(Gamma(n) Gamma(2a)) = 2a * prod_{j<n}(1 + 2a/j), which
    reproduces the vanishing-reciprocal-gamma convention automatically: the
    prefactor is 0 at a = 0 and the product hits a zero factor at a = -1/2.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    alpha = params.alpha
    if alpha == Fraction(1, 2):
        return n * sum(Fraction(1, ell) for ell in range(1, n + 1))
    two_a = 2 * alpha
    return Fraction(n, 1) / (1 - two_a) + two_a / (two_a - 1) * drift_scale_exact(
        two_a, n
    )


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_distributions(
    params: ErwParams, n_max: int
) -> Dict[int, Dict[int, Fraction]]:
    """Exact law of S_t for every t = 1..n_max by enumerating sign paths.

    Each path (x_1, ..., x_n) carries probability q or 1-q for the first
    step and (1 + x_{t+1} * alpha * s_t / t)/2 thereafter; probabilities are
    accumulated as exact rationals.  Refused for n_max > 14.
    """
    if not 1 <= n_max <= BRUTE_FORCE_MAX_N:
        raise ValidationError(
            f"path enumeration handles 1 <= n <= {BRUTE_FORCE_MAX_N}, got {n_max}"
        )
    an, ad = params.alpha.numerator, params.alpha.denominator
    dists: Dict[int, Dict[int, Fraction]] = {t: {} for t in range(1, n_max + 1)}

    def record(t: int, s: int, prob: Fraction) -> None:
        d = dists[t]
        d[s] = d.get(s, Fraction(0)) + prob

    def walk(t: int, s: int, prob: Fraction) -> None:
        record(t, s, prob)
        if t == n_max:
            return
        # P(X_{t+1} = +1 | S_t = s) = (t*ad + an*s) / (2*t*ad)
        p_up = Fraction(t * ad + an * s, 2 * t * ad)
        if p_up > 0:
            walk(t + 1, s + 1, prob * p_up)
        if p_up < 1:
            walk(t + 1, s - 1, prob * (1 - p_up))

    q = params.q
    if q > 0:
        walk(1, 1, q)
    if q < 1:
        walk(1, -1, 1 - q)
    return dists


def brute_force_moment(params: ErwParams, n: int, k: int) -> Fraction:
    """Oracle E[(S_n)^k] from the enumerated path distribution."""
    dist = brute_force_distributions(params, n)[n]
    return sum((Fraction(s) ** k) * p for s, p in dist.items())


# ---------------------------------------------------------------------------
# float path
# ---------------------------------------------------------------------------

def _solve_linear_float(
    f: np.ndarray, g: np.ndarray, x_start: float, j0: int, n_max: int
) -> np.ndarray:
    """Solve x_{n+1} = f_n + g_n x_n from x_{j0+1} = x_start, vectorized.

    ``f`` and ``g`` are indexed by j = j0+1 .. n_max-1.  Returns x at
    n = j0+1 .. n_max (length n_max - j0).  Accumulation runs in extended
    precision; requires g_j != 0 for j > j0.
    """
    count = n_max - j0
    gbar = np.empty(count, dtype=np.longdouble)
    gbar[0] = 1.0
    np.cumprod(g.astype(np.longdouble), out=gbar[1:])
    out = np.empty(count, dtype=np.longdouble)
    out[0] = 0.0
    np.cumsum(f.astype(np.longdouble) / gbar[1:], out=out[1:])
    out += np.longdouble(x_start)
    out *= gbar
    return out


def moments_float(
    params: ErwParams, orders: Sequence[int], n_max: int
) -> Dict[int, np.ndarray]:
    """E[(S_n)^k] as float64 arrays over n = 1..n_max for each requested order.

    Solves the same recursions as the exact path, one order at a time, with
    the inhomogeneity built from the lower orders of the same parity.  Entry
    [n] of each array is the moment at time n; entry [0] is NaN.
    """
    orders = sorted(set(int(k) for k in orders))
    if not orders:
        return {}
    if orders[0] < 1:
        raise ValidationError(f"orders must be >= 1, got {orders[0]}")
    alpha = params.alpha
    a = float(alpha)
    j = np.arange(1, n_max, dtype=np.float64)
    out: Dict[int, np.ndarray] = {}
    done: Dict[int, np.ndarray] = {}
    for parity in (1, 0):
        chain = [k for k in range(1, max(orders) + 1) if k % 2 == parity]
        if not any(k in orders for k in chain):
            continue
        for k in chain:
            j0, _ = product_asymptote(k * alpha)
            if j0 >= n_max:
                raise ValidationError(f"n_max={n_max} too small for order {k}")
            g = 1.0 + (k * a) / j[j0:]
            if parity == 1:
                f = np.zeros(n_max - 1 - j0)
                for ell in range(1, (k + 1) // 2):
                    w = math.comb(k, 2 * ell - 1) + (a / j[j0:]) * math.comb(
                        k, 2 * ell - 2
                    )
                    f += w * done[2 * ell - 1][j0 + 1 : n_max]
            else:
                f = np.ones(n_max - 1 - j0)
                for ell in range(1, k // 2):
                    w = math.comb(k, 2 * ell) + (a / j[j0:]) * math.comb(
                        k, 2 * ell - 1
                    )
                    f += w * done[2 * ell][j0 + 1 : n_max]
            start_mv = moments_at(params, j0 + 1, k if k % 2 == 0 else k + 1)
            x = _solve_linear_float(f, g, float(start_mv[k]), j0, n_max)
            full = np.full(n_max + 1, np.nan)
            full[j0 + 1 :] = x.astype(np.float64)
            if j0 >= 1:
                for mv in iter_moments(params, k if k % 2 == 0 else k + 1, range(1, j0 + 1)):
                    full[mv.n] = float(mv[k])
            done[k] = full
        for k in chain:
            if k in orders:
                out[k] = done[k]
    return out
