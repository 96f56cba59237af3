"""The Poisson channel Y | X = x ~ Poisson(a x + lam).

Output probabilities are always carried in the log domain and exponentiated
once at the end.  Three routes compute P_Y:

* ``MIXTURE``: the definition, P_Y(y) = E[P_{Y|X}(y | X)], by exact summation
  or adaptive quadrature over the prior;
* ``LAPLACE``: a finite sum of Laplace-transform derivatives of X at t = a;
* ``CLOSED_FORM``: negative binomial (gamma prior with lam = 0) or the
  exponential-prior formula valid for any dark current.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from . import specfun
from .errors import (
    DomainError,
    MomentError,
    TruncationError,
    UnsupportedOrderError,
    UnsupportedRouteError,
)
from .priors import Gamma, Prior

__all__ = [
    "ChannelParams",
    "PmfRoute",
    "OutputPmf",
    "log_likelihood",
    "likelihood",
    "log_pmf_point",
    "pmf_point",
    "log_tail_mass",
    "output_pmf",
    "auto_y_max",
    "sample_channel",
    "pmf_deriv_lambda",
    "pmf_grad_combination",
    "tail_bounds",
    "exponential_pmf_lemma",
    "DEFAULT_TAIL_TOL",
    "MAX_AUTO_Y",
]

DEFAULT_TAIL_TOL = 1e-12
MAX_AUTO_Y = 5000


@dataclass(frozen=True)
class ChannelParams:
    a: float
    lam: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"scaling a must be positive, got {self.a!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"dark current lambda must be nonnegative, got {self.lam!r}")

    def mean_intensity(self, prior: Prior) -> float:
        """E[U] = a E[X] + lam."""
        return self.a * prior.mean() + self.lam

    def with_(self, a: float | None = None, lam: float | None = None) -> "ChannelParams":
        return ChannelParams(self.a if a is None else a, self.lam if lam is None else lam)

    def to_dict(self) -> dict:
        return {"a": self.a, "lambda": self.lam}


class PmfRoute(enum.Enum):
    MIXTURE = "mixture"
    LAPLACE = "laplace"
    CLOSED_FORM = "closed_form"


# -- likelihood -------------------------------------------------------------------

def log_likelihood(y: int, x, params: ChannelParams):
    """log P(Y = y | X = x), vectorised over x, with the convention 0^0 = 1."""
    u = params.a * np.asarray(x, dtype=float) + params.lam
    return special.xlogy(y, u) - u - math.lgamma(y + 1.0)


def likelihood(y: int, x: float, params: ChannelParams) -> float:
    if y < 0:
        return 0.0
    return float(np.exp(log_likelihood(int(y), x, params)))


def _hints(y: int, params: ChannelParams) -> list[float]:
    peak = (y - params.lam) / params.a
    return [peak] if peak > 0 else []


def log_pmf_point(prior: Prior, params: ChannelParams, y: int) -> float:
    """log P_Y(y) by the mixture definition."""
    if y < 0:
        return -math.inf
    y = int(y)
    return prior.log_expect(lambda x: log_likelihood(y, x, params), _hints(y, params))


def pmf_point(prior: Prior, params: ChannelParams, y: int) -> float:
    return math.exp(log_pmf_point(prior, params, y))


def log_tail_mass(prior: Prior, params: ChannelParams, y_max: int) -> float:
    """log P[Y > y_max], exactly: E[P(y_max + 1, aX + lam)] with P the
    regularised lower incomplete gamma function."""
    s = y_max + 1.0

    def logf(x):
        u = params.a * np.asarray(x, dtype=float) + params.lam
        with np.errstate(divide="ignore"):
            return np.log(special.gammainc(s, u))

    return prior.log_expect(logf, _hints(y_max + 1, params))


def _markov_bound(prior: Prior, params: ChannelParams, y_max: int) -> float:
    try:
        return params.mean_intensity(prior) / (y_max + 1.0)
    except MomentError:
        return math.inf


def auto_y_max(prior: Prior, params: ChannelParams, tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest y_max whose exact tail mass is below ``tol``."""
    try:
        params.mean_intensity(prior)
    except MomentError as exc:
        raise MomentError("automatic y_max needs a finite prior mean; pass y_max explicitly") from exc
    log_tol = math.log(tol)
    hi = 8
    while log_tail_mass(prior, params, hi) > log_tol:
        hi *= 2
        if hi > MAX_AUTO_Y:
            raise TruncationError(f"tail mass above {tol} beyond y = {MAX_AUTO_Y}")
    lo = hi // 2 if hi > 8 else -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid >= 0 and log_tail_mass(prior, params, mid) <= log_tol:
            hi = mid
        else:
            lo = mid
    return hi


# -- output pmf ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OutputPmf:
    """P_Y on {0, ..., y_max}; ``tail_bound`` bounds P[Y > y_max]."""

    log_probs: np.ndarray
    tail_bound: float
    params: ChannelParams
    route: str = PmfRoute.MIXTURE.value

    def __post_init__(self):
        lp = np.array(self.log_probs, dtype=float)
        lp.setflags(write=False)
        object.__setattr__(self, "log_probs", lp)
        probs = np.exp(lp)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_probs(cls, probs: Sequence[float], params: ChannelParams,
                   tail_bound: float = 0.0, route: str = "external") -> "OutputPmf":
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0):
            raise DomainError("probabilities must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.log(p), float(tail_bound), params, route)

    @property
    def y_max(self) -> int:
        return self.log_probs.size - 1

    def log_prob(self, y: int) -> float:
        if y < 0:
            return -math.inf
        if y > self.y_max:
            raise TruncationError(f"y = {y} beyond the truncation point {self.y_max}")
        return float(self.log_probs[y])

    def prob(self, y: int) -> float:
        return math.exp(self.log_prob(y))

    def total(self) -> float:
        return math.fsum(self.probs)

    def mean(self) -> float:
        return math.fsum(np.arange(self.y_max + 1) * self.probs)

    def to_csv(self) -> str:
        from .io import fmt

        lines = ["y,prob"]
        lines += [f"{y},{fmt(p)}" for y, p in enumerate(self.probs)]
        lines.append(f"# tail_bound={fmt(self.tail_bound)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "probs": [float(p) for p in self.probs],
            "tail_bound": float(self.tail_bound),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _log_pmf_mixture(prior, params, y_max):
    return np.array([log_pmf_point(prior, params, y) for y in range(y_max + 1)])


def _log_pmf_laplace(prior, params, y_max):
    a, lam = params.a, params.lam
    try:
        log_l = np.array([prior.log_abs_laplace_deriv(m, a) for m in range(y_max + 1)])
    except (UnsupportedOrderError, NotImplementedError) as exc:
        raise UnsupportedRouteError(f"Laplace route unavailable up to y = {y_max}: {exc}") from exc
    out = np.empty(y_max + 1)
    log_a = math.log(a)
    log_lam = math.log(lam) if lam > 0 else -math.inf
    for y in range(y_max + 1):
        if lam == 0:
            out[y] = y * log_a + log_l[y] - math.lgamma(y + 1.0)
            continue
        i = np.arange(y + 1)
        # every term of the binomial sum carries the sign (-1)^y, so the sum
        # is evaluated as a log-sum-exp of magnitudes without cancellation
        terms = (special.gammaln(y + 1.0) - special.gammaln(i + 1.0) - special.gammaln(y - i + 1.0)
                 + (y - i) * log_a + i * log_lam + log_l[y - i])
        out[y] = -lam - math.lgamma(y + 1.0) + specfun.logsumexp(terms)
    return out


def _exponential_rate(prior: Prior) -> float | None:
    if isinstance(prior, Gamma) and prior.shape == 1.0:
        return prior.rate
    return None


def _log_pmf_closed(prior, params, y_max):
    a, lam = params.a, params.lam
    y = np.arange(y_max + 1, dtype=float)
    if isinstance(prior, Gamma) and lam == 0:
        al, th = prior.rate, prior.shape
        return (y * math.log(a) + th * math.log(al) - (th + y) * math.log(al + a)
                + special.gammaln(th + y) - special.gammaln(th) - special.gammaln(y + 1.0))
    al = _exponential_rate(prior)
    if al is not None:
        r = 1.0 + al / a
        return np.array([
            math.log(al / a) + al * lam / a
            + specfun.log_upper_incomplete_gamma(k + 1.0, lam * r)
            - math.lgamma(k + 1.0) - (k + 1.0) * math.log(r)
            for k in range(y_max + 1)
        ])
    raise UnsupportedRouteError(
        "closed-form pmf exists only for gamma priors with lambda = 0 and exponential priors")


def exponential_pmf_lemma(rate: float, params: ChannelParams, k: int) -> float:
    """Exponential-prior output pmf written as differences of regularised
    upper incomplete gamma functions.  Algebraically equal to the all-positive
    form used by the closed-form route, kept as an independent check."""
    a, lam = params.a, params.lam
    if k == 0:
        return rate * math.exp(-lam) / (rate + a)
    r = 1.0 + rate / a
    q = specfun.regularized_upper_gamma
    first = q(k + 1, lam) - q(k, lam)
    second = q(k, lam * r) - q(k + 1, lam * r) / r
    return first + math.exp(rate * lam / a) / r ** k * second


def output_pmf(prior: Prior, params: ChannelParams, route: PmfRoute | str = PmfRoute.MIXTURE,
               y_max: int | str = "auto", tail_tol: float = DEFAULT_TAIL_TOL) -> OutputPmf:
    route = PmfRoute(route)
    if y_max == "auto" or y_max is None:
        y_max = auto_y_max(prior, params, tail_tol)
    y_max = int(y_max)
    if y_max < 0:
        raise DomainError("y_max must be nonnegative")
    if route is PmfRoute.MIXTURE:
        lp = _log_pmf_mixture(prior, params, y_max)
    elif route is PmfRoute.LAPLACE:
        lp = _log_pmf_laplace(prior, params, y_max)
    else:
        lp = _log_pmf_closed(prior, params, y_max)
    tail = math.exp(log_tail_mass(prior, params, y_max))
    # quadrature tolerance is ~1e-13 relative; pad the exact tail accordingly
    tail_bound = min(_markov_bound(prior, params, y_max), tail * (1.0 + 1e-9) + 1e-300)
    return OutputPmf(lp, tail_bound, params, route.value)


# -- sampling -------------------------------------------------------------------------

def sample_channel(prior: Prior, params: ChannelParams, rng: np.random.Generator,
                   n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw n pairs (x, y) with Y | X = x ~ Poisson(a x + lam)."""
    if n < 1:
        raise DomainError("sample size must be positive")
    x = prior.sample(rng, n)
    y = rng.poisson(params.a * x + params.lam)
    return x, y


# -- pmf identities ------------------------------------------------------------------

def pmf_deriv_lambda(prior: Prior, params: ChannelParams, y: int) -> float:
    """d P_Y(y) / d lam = P_Y(y - 1) - P_Y(y), with P_Y(-1) = 0."""
    prev = pmf_point(prior, params, y - 1) if y > 0 else 0.0
    return prev - pmf_point(prior, params, y)


def pmf_grad_combination(prior: Prior, params: ChannelParams, y: int) -> float:
    """a dP_Y/da + lam dP_Y/dlam, evaluated as y P_Y(y) - (y+1) P_Y(y+1)."""
    return y * pmf_point(prior, params, y) - (y + 1) * pmf_point(prior, params, y + 1)


def tail_bounds(prior: Prior, params: ChannelParams, y: int) -> tuple[float, float]:
    """Universal lower and upper bounds on P_Y(y).

    lower = exp(y E[log U] - E[U]) / y!  (Jensen), upper = min(y^y e^-y / y!,
    1 / sqrt(2 pi y)) for y >= 1 and 1 at y = 0.
    """
    if y < 0:
        raise DomainError("y must be nonnegative")
    mean_u = params.mean_intensity(prior)
    if y == 0:
        lower = math.exp(-mean_u)
        return lower, 1.0
    elog = prior.log_moment(params.a, params.lam)
    lower = math.exp(y * elog - mean_u - math.lgamma(y + 1.0))
    log_upper = y * math.log(y) - y - math.lgamma(y + 1.0)
    upper = min(math.exp(log_upper), 1.0 / math.sqrt(2.0 * math.pi * y))
    return lower, upper
