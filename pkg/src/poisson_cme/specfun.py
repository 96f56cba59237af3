"""Special-function kernel.

Real-argument implementations of the functions that appear in the closed-form
conditional expectations and in the growth bounds: log-gamma, digamma, the
incomplete gamma functions, both real branches of Lambert W, Touchard
polynomials and the modified Bessel function of the second kind.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from scipy import special as _sp

from .errors import DomainError

__all__ = [
    "WBranch",
    "log_gamma",
    "log_factorial",
    "log_binom",
    "digamma",
    "upper_incomplete_gamma",
    "lower_incomplete_gamma",
    "log_upper_incomplete_gamma",
    "log_lower_incomplete_gamma",
    "regularized_upper_gamma",
    "regularized_lower_gamma",
    "log_regularized_lower_gamma",
    "incomplete_gamma_interval",
    "log_incomplete_gamma_interval",
    "lambert_w",
    "lambert_w_neg1_bound",
    "touchard",
    "bessel_k",
    "log_bessel_k",
    "logsumexp",
]

EULER_GAMMA = 0.57721566490153286061
_INV_E = math.exp(-1.0)
_MAX_ITER = 10_000
_EPS = 1e-16


class WBranch(enum.Enum):
    PRINCIPAL = "principal"
    NEGATIVE_ONE = "negative_one"


def log_gamma(x: float) -> float:
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def log_factorial(n: int) -> float:
    return math.lgamma(n + 1.0)


def log_binom(n: float, k: float) -> float:
    """log C(n, k) through log-gamma, for n >= k >= 0."""
    return math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)


def logsumexp(values) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return -math.inf
    m = float(np.max(arr))
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(np.exp(arr - m)))


# Bernoulli-number coefficients B_{2k} / (2k) of the digamma asymptotic series.
_DIGAMMA_ASYMP = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x: float) -> float:
    """psi(x) = d/dx log Gamma(x) for x > 0.

    Upward recurrence to x >= 10, then the asymptotic expansion.
    """
    if not x > 0:
        raise DomainError(f"digamma requires x > 0, got {x!r}")
    shift = 0.0
    while x < 10.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for c in _DIGAMMA_ASYMP:
        series += c * power
        power *= inv2
    return shift + math.log(x) - 0.5 / x - series


# -- incomplete gamma -------------------------------------------------------

def _check_gamma_args(s: float, x: float) -> None:
    if not s > 0:
        raise DomainError(f"incomplete gamma requires s > 0, got {s!r}")
    if not x >= 0:
        raise DomainError(f"incomplete gamma requires x >= 0, got {x!r}")


def _log_lower_series(s: float, x: float) -> float:
    # gamma(s, x) = x^s e^{-x} sum_n x^n / (s (s+1) ... (s+n))
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return s * math.log(x) - x + math.log(total)


def _log_upper_cf(s: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Gamma(s, x)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return s * math.log(x) - x + math.log(h)


def log_lower_incomplete_gamma(s: float, x: float) -> float:
    _check_gamma_args(s, x)
    if x == 0:
        return -math.inf
    if x <= s + 1.0:
        return _log_lower_series(s, x)
    lg = math.lgamma(s)
    q = math.exp(_log_upper_cf(s, x) - lg)
    return lg + math.log1p(-q)


def log_upper_incomplete_gamma(s: float, x: float) -> float:
    _check_gamma_args(s, x)
    lg = math.lgamma(s)
    if x == 0:
        return lg
    if x > s + 1.0:
        return _log_upper_cf(s, x)
    p = math.exp(_log_lower_series(s, x) - lg)
    return lg + math.log1p(-p)


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Gamma(s, x), the integral of t^(s-1) e^(-t) over [x, inf)."""
    return math.exp(log_upper_incomplete_gamma(s, x))


def lower_incomplete_gamma(s: float, x: float) -> float:
    return math.exp(log_lower_incomplete_gamma(s, x))


def regularized_upper_gamma(s: float, x: float) -> float:
    return math.exp(log_upper_incomplete_gamma(s, x) - math.lgamma(s))


def regularized_lower_gamma(s: float, x: float) -> float:
    return math.exp(log_lower_incomplete_gamma(s, x) - math.lgamma(s))


def log_regularized_lower_gamma(s: float, x: float) -> float:
    """log P(s, x); equals log of the Poisson(x) probability of exceeding s - 1."""
    return log_lower_incomplete_gamma(s, x) - math.lgamma(s)


def incomplete_gamma_interval(s: float, lo: float, hi: float) -> float:
    """Integral of t^(s-1) e^(-t) over [lo, hi], avoiding the cancellation of
    Gamma(s, lo) - Gamma(s, hi) when both terms are close to Gamma(s)."""
    if hi < lo:
        raise DomainError("incomplete_gamma_interval requires lo <= hi")
    _check_gamma_args(s, lo)
    if hi == lo:
        return 0.0
    if hi <= s + 1.0:
        return math.exp(log_lower_incomplete_gamma(s, hi)) - (
            0.0 if lo == 0 else math.exp(log_lower_incomplete_gamma(s, lo))
        )
    return math.exp(log_upper_incomplete_gamma(s, lo)) - math.exp(
        log_upper_incomplete_gamma(s, hi)
    )


def log_incomplete_gamma_interval(s: float, lo: float, hi: float) -> float:
    """log of incomplete_gamma_interval, safe when Gamma(s) overflows."""
    if hi < lo:
        raise DomainError("incomplete_gamma_interval requires lo <= hi")
    _check_gamma_args(s, lo)
    if hi == lo:
        return -math.inf
    if hi <= s + 1.0:
        big = log_lower_incomplete_gamma(s, hi)
        small = -math.inf if lo == 0 else log_lower_incomplete_gamma(s, lo)
    else:
        big = log_upper_incomplete_gamma(s, lo)
        small = log_upper_incomplete_gamma(s, hi)
    if small == -math.inf:
        return big
    return big + math.log1p(-math.exp(small - big))


# -- Lambert W ---------------------------------------------------------------

# Series of W around the branch point in p = +/- sqrt(2 (e x + 1)).
_BRANCH_SERIES = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0,
                  769.0 / 17280.0, -221.0 / 8505.0)


def _branch_point_series(p: float) -> float:
    total = 0.0
    for c in reversed(_BRANCH_SERIES):
        total = total * p + c
    return total


def _halley(w: float, x: float) -> float:
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 4 * _EPS * (1.0 + abs(w)):
            break
    return w


def lambert_w(branch: WBranch, x: float) -> float:
    """Real Lambert W: the solution w of w e^w = x on the requested branch."""
    branch = WBranch(branch)
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"lambert_w requires a finite argument, got {x!r}")
    q = math.e * x + 1.0
    if q < 0:
        if q > -1e-15:
            q = 0.0
        else:
            raise DomainError(f"lambert_w undefined for x < -1/e (x={x!r})")
    if branch is WBranch.NEGATIVE_ONE and x >= 0:
        raise DomainError(f"W_-1 requires -1/e <= x < 0, got {x!r}")
    if q == 0.0:
        return -1.0
    if x == 0.0:
        return 0.0
    p = math.sqrt(2.0 * q)
    if branch is WBranch.PRINCIPAL:
        if x < -0.25:
            w = _branch_point_series(p)
        elif x < 3.0:
            w = math.log1p(x)
        else:
            l1 = math.log(x)
            l2 = math.log(l1)
            w = l1 - l2 + l2 / l1
    else:
        if x < -0.25:
            w = _branch_point_series(-p)
        else:
            l1 = math.log(-x)
            l2 = math.log(-l1)
            w = l1 - l2 + l2 / l1
    if abs(p) < 1e-3:
        # series error is O(p^7); Halley is ill-conditioned this close to -1
        return w
    w = _halley(w, x)
    if branch is WBranch.PRINCIPAL:
        return max(w, -1.0)
    return min(w, -1.0)


def lambert_w_neg1_bound(x: float) -> float:
    """Upper bound 2 log(1/x) on -W_{-1}(-x), valid for 0 < x <= 1/e."""
    if not (0.0 < x <= _INV_E * (1 + 1e-15)):
        raise DomainError(f"bound defined on (0, 1/e], got {x!r}")
    return 2.0 * math.log(1.0 / x)


# -- polynomials and Bessel ---------------------------------------------------

TOUCHARD_MAX_ORDER = 60


def touchard(n: int, x: float) -> float:
    """Touchard polynomial T_n(x) from T_{m+1}(x) = x sum_k C(m, k) T_k(x)."""
    if n < 0 or int(n) != n:
        raise DomainError(f"touchard order must be a nonnegative integer, got {n!r}")
    n = int(n)
    if n > TOUCHARD_MAX_ORDER:
        raise DomainError(f"touchard order capped at {TOUCHARD_MAX_ORDER}, got {n}")
    values = [1.0]
    for m in range(n):
        acc = math.fsum(math.comb(m, k) * values[k] for k in range(m + 1))
        nxt = x * acc
        if not math.isfinite(nxt):
            raise OverflowError(f"touchard T_{m + 1}({x}) overflows")
        values.append(nxt)
    return values[n]


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    if not x > 0:
        raise DomainError(f"bessel_k requires x > 0, got {x!r}")
    return float(_sp.kv(abs(nu), x))


def log_bessel_k(nu: float, x: float) -> float:
    if not x > 0:
        raise DomainError(f"bessel_k requires x > 0, got {x!r}")
    return math.log(float(_sp.kve(abs(nu), x))) - x
