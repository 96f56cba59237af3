"""Posterior moments E[X^k | Y = y] by several independent routes.

Routes
------
direct
    Ratio of prior expectations E[X^k P(y|X)] / E[P(y|X)].  This is the oracle
    every other route is compared against.
tgr
    The Turing-Good-Robbins ratio ((y+1) P_Y(y+1) / P_Y(y) - lam) / a, which
    only needs the output pmf.
laplace
    Ratio of binomial sums of Laplace-transform derivatives of X at t = a.
closed_form
    Family-specific formulas for lam = 0 (gamma, inverse gamma, uniform,
    Bernoulli, Poisson) plus the exponential prior at any dark current.
product
    E[U^k | y] as the product of first conditional moments at y, ..., y+k-1.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import special

from . import specfun
from .channel import ChannelParams, OutputPmf, log_likelihood, log_pmf_point, _hints
from .errors import (
    CancellationError,
    DegenerateEvidenceError,
    DomainError,
    MomentError,
    NoObservationsError,
    TruncationError,
    UnsupportedOrderError,
    UnsupportedRouteError,
)
from .priors import Bernoulli, Gamma, InverseGamma, PoissonPrior, Prior, Uniform

__all__ = [
    "Route",
    "EstimatorCurve",
    "EmpiricalCounts",
    "posterior_mean_direct",
    "posterior_moment_direct",
    "posterior_mean_tgr",
    "posterior_moment",
    "posterior_moment_product",
    "posterior_variance",
    "posterior_mean_laplace",
    "closed_form_mean",
    "empirical_bayes_mean",
    "estimator_curve",
]

_LOG_EVIDENCE_FLOOR = math.log(1e-300)
_CANCELLATION_DIGITS = 6


class Route(enum.Enum):
    DIRECT = "direct"
    TGR = "tgr"
    LAPLACE = "laplace"
    CLOSED_FORM = "closed_form"
    PRODUCT = "product"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class EstimatorCurve:
    """y -> E[X^k | Y = y] for y = 0..len(values)-1, tagged with its route."""

    k: int
    values: tuple[float, ...]
    route: str
    params: ChannelParams

    def to_csv(self) -> str:
        from .io import rows_to_csv

        return rows_to_csv(["y", "value"], list(enumerate(self.values)))

    def to_dict(self) -> dict:
        return {"k": self.k, "route": self.route, "params": self.params.to_dict(),
                "values": list(self.values)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class EmpiricalCounts:
    counts: Mapping[int, int]
    n_total: int = field(default=-1)

    def __post_init__(self):
        clean = {int(y): int(c) for y, c in self.counts.items()}
        if any(y < 0 or c < 0 for y, c in clean.items()):
            raise DomainError("counts must be indexed by nonnegative y with nonnegative values")
        total = sum(clean.values())
        if self.n_total not in (-1, total):
            raise DomainError(f"n_total {self.n_total} disagrees with sum of counts {total}")
        if total <= 0:
            raise DomainError("empirical counts are empty")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))
        object.__setattr__(self, "n_total", total)

    def get(self, y: int) -> int:
        return self.counts.get(y, 0)

    @classmethod
    def from_samples(cls, ys) -> "EmpiricalCounts":
        ys = np.asarray(ys)
        if ys.size == 0:
            raise DomainError("no samples")
        if np.any(ys < 0) or np.any(ys != np.floor(ys)):
            raise DomainError("samples must be nonnegative integers")
        vals, cnt = np.unique(ys.astype(np.int64), return_counts=True)
        return cls({int(v): int(c) for v, c in zip(vals, cnt)})

    @classmethod
    def from_csv(cls, path: str | Path) -> "EmpiricalCounts":
        """Read either ``y,count`` rows or a single column ``y`` of raw draws."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows:
            raise DomainError(f"{path}: empty input")
        header = [h.strip().lower() for h in rows[0]]
        body = rows[1:] if not _is_number(rows[0][0]) else rows
        try:
            if header[:2] == ["y", "count"] or (len(rows[0]) >= 2 and _is_number(rows[0][0])):
                counts: dict[int, int] = {}
                for r in body:
                    y, c = _as_int(r[0]), _as_int(r[1])
                    counts[y] = counts.get(y, 0) + c
                return cls(counts)
            return cls.from_samples([_as_int(r[0]) for r in body])
        except (IndexError, ValueError) as exc:
            raise DomainError(f"{path}: malformed counts ({exc})") from exc


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _as_int(s: str) -> int:
    v = float(s)
    if v != math.floor(v) or v < 0:
        raise ValueError(f"{s!r} is not a nonnegative integer")
    return int(v)


# -- direct route -----------------------------------------------------------------

def _log_evidence(prior: Prior, params: ChannelParams, y: int) -> float:
    lp = log_pmf_point(prior, params, y)
    if lp < _LOG_EVIDENCE_FLOOR:
        raise DegenerateEvidenceError(f"P_Y({y}) below 1e-300; posterior undefined")
    return lp


def posterior_moment_direct(prior: Prior, params: ChannelParams, y: int, k: int = 1,
                            of: str = "X") -> float:
    """E[X^k | Y=y] (``of="X"``) or E[U^k | Y=y] with U = aX + lam (``of="U"``)."""
    if y < 0:
        raise DomainError("y must be nonnegative")
    if k == 0:
        return 1.0
    a, lam = params.a, params.lam
    if of == "X":
        def logf(x):
            with np.errstate(divide="ignore"):
                return k * np.log(x) + log_likelihood(y, x, params)
    elif of == "U":
        def logf(x):
            with np.errstate(divide="ignore"):
                return k * np.log(a * x + lam) + log_likelihood(y, x, params)
    else:
        raise DomainError("of must be 'X' or 'U'")
    denom = _log_evidence(prior, params, y)
    num = prior.log_expect(logf, _hints(y + k, params))
    return math.exp(num - denom)


def posterior_mean_direct(prior: Prior, params: ChannelParams, y: int) -> float:
    return posterior_moment_direct(prior, params, y, 1, "X")


# -- pmf-based routes ----------------------------------------------------------------

def _pmf_ratio(pmf: OutputPmf, y: int, k: int) -> float:
    """(y+k)!/y! * P_Y(y+k)/P_Y(y), i.e. E[U^k | Y=y]."""
    if y < 0:
        raise DomainError("y must be nonnegative")
    if y + k > pmf.y_max:
        raise TruncationError(f"needs P_Y({y + k}) but the pmf stops at {pmf.y_max}")
    lp = pmf.log_prob(y)
    if lp < _LOG_EVIDENCE_FLOOR:
        raise DegenerateEvidenceError(f"P_Y({y}) below 1e-300")
    log_fact = math.lgamma(y + k + 1.0) - math.lgamma(y + 1.0)
    return math.exp(log_fact + pmf.log_prob(y + k) - lp)


def posterior_mean_tgr(pmf: OutputPmf, y: int) -> float:
    a, lam = pmf.params.a, pmf.params.lam
    return (_pmf_ratio(pmf, y, 1) - lam) / a


def posterior_moment(prior: Prior, params: ChannelParams, y: int, k: int,
                     pmf: OutputPmf | None = None) -> float:
    """E[U^k | Y=y] = (y+k)!/y! * P_Y(y+k) / P_Y(y)."""
    if k < 1:
        raise DomainError("k must be a positive integer")
    if pmf is not None:
        return _pmf_ratio(pmf, y, k)
    lp = _log_evidence(prior, params, y)
    log_fact = math.lgamma(y + k + 1.0) - math.lgamma(y + 1.0)
    return math.exp(log_fact + log_pmf_point(prior, params, y + k) - lp)


def _first_moments(prior, params, y, count, pmf):
    if pmf is not None:
        return [_pmf_ratio(pmf, y + i, 1) for i in range(count)]
    lps = [log_pmf_point(prior, params, y + i) for i in range(count + 1)]
    if lps[0] < _LOG_EVIDENCE_FLOOR:
        raise DegenerateEvidenceError(f"P_Y({y}) below 1e-300")
    return [(y + i + 1) * math.exp(lps[i + 1] - lps[i]) for i in range(count)]


def posterior_moment_product(prior: Prior, params: ChannelParams, y: int, k: int,
                             pmf: OutputPmf | None = None) -> float:
    """E[U^k | Y=y] as the product of E[U | Y=y+i] over i < k."""
    if k < 1:
        raise DomainError("k must be a positive integer")
    return math.prod(_first_moments(prior, params, y, k, pmf))


def posterior_variance(prior: Prior, params: ChannelParams, y: int,
                       pmf: OutputPmf | None = None, of: str = "U") -> float:
    """V(U | Y=y) = E[U|y] (E[U|y+1] - E[U|y]); ``of="X"`` divides by a^2."""
    m0, m1 = _first_moments(prior, params, y, 2, pmf)
    v = m0 * (m1 - m0)
    if of == "X":
        v /= params.a ** 2
    elif of != "U":
        raise DomainError("of must be 'X' or 'U'")
    return max(v, 0.0) if v > -1e-12 * m0 * m0 else v


# -- Laplace representation ------------------------------------------------------------

def _log_binomial_sum(prior: Prior, params: ChannelParams, n: int, log_l: list[float]) -> float:
    """log |sum_i C(n,i) a^(n-i) (-lam)^i L^(n-i)(a)|; all terms share the sign (-1)^n."""
    a, lam = params.a, params.lam
    if lam == 0:
        return n * math.log(a) + log_l[n]
    i = np.arange(n + 1)
    terms = (special.gammaln(n + 1.0) - special.gammaln(i + 1.0) - special.gammaln(n - i + 1.0)
             + (n - i) * math.log(a) + i * math.log(lam) + np.asarray(log_l)[n - i])
    return specfun.logsumexp(terms)


def posterior_mean_laplace(prior: Prior, params: ChannelParams, y: int) -> float:
    """E[X|Y=y] = -S_{y+1} / (a S_y) - lam / a with S_n the binomial sums of
    Laplace derivatives; for lam = 0 this is -L^(y+1)(a) / L^(y)(a)."""
    if y < 0:
        raise DomainError("y must be nonnegative")
    a, lam = params.a, params.lam
    try:
        log_l = [prior.log_abs_laplace_deriv(m, a) for m in range(y + 2)]
    except NotImplementedError as exc:
        raise UnsupportedRouteError(f"{prior.family} has no Laplace derivatives") from exc
    if log_l[y] == -math.inf and lam == 0:
        raise DegenerateEvidenceError(f"L^({y})({a}) vanishes")
    ratio = math.exp(_log_binomial_sum(prior, params, y + 1, log_l)
                     - _log_binomial_sum(prior, params, y, log_l))
    if lam == 0:
        return ratio / a
    diff = ratio - lam
    if diff < ratio * 10.0 ** (-_CANCELLATION_DIGITS):
        raise CancellationError(
            f"subtracting lam loses more than {_CANCELLATION_DIGITS} digits at y = {y}")
    return diff / a


# -- table closed forms -------------------------------------------------------------------

def closed_form_mean(prior: Prior, params: ChannelParams, y: int) -> float:
    """Family-specific closed form for E[X | Y=y].

    lam = 0: gamma, inverse gamma, uniform, Bernoulli and Poisson priors.
    lam > 0: exponential prior only (TGR applied to its closed-form pmf).
    """
    if y < 0:
        raise DomainError("y must be nonnegative")
    a, lam = params.a, params.lam
    if lam > 0:
        if isinstance(prior, Gamma) and prior.shape == 1.0:
            r = 1.0 + prior.rate / a
            x = lam * r
            ratio = math.exp(specfun.log_upper_incomplete_gamma(y + 2.0, x)
                             - specfun.log_upper_incomplete_gamma(y + 1.0, x))
            return (ratio / r - lam) / a
        raise UnsupportedRouteError(
            "closed forms with lambda > 0 exist only for the exponential prior")
    if isinstance(prior, Gamma):
        return (y + prior.shape) / (prior.rate + a)
    if isinstance(prior, InverseGamma):
        al, be = prior.shape, prior.scale
        nu_num, nu_den = al - (y + 1), al - y
        if max(abs(nu_num), abs(nu_den)) > 50:
            raise UnsupportedOrderError("Bessel order beyond 50")
        z = math.sqrt(4.0 * be * a)
        return math.sqrt(be / a) * math.exp(specfun.log_bessel_k(nu_num, z)
                                            - specfun.log_bessel_k(nu_den, z))
    if isinstance(prior, Uniform):
        c, b = prior.low, prior.high
        num = specfun.log_incomplete_gamma_interval(y + 2.0, c * a, b * a)
        den = specfun.log_incomplete_gamma_interval(y + 1.0, c * a, b * a)
        return math.exp(num - den) / a
    if isinstance(prior, Bernoulli):
        if y > 0:
            if prior.p == 0:
                raise DegenerateEvidenceError("P_Y(y) = 0 for y > 0 when p = 0")
            return 1.0
        pe = prior.p * math.exp(-a)
        return pe / (1.0 - prior.p + pe)
    if isinstance(prior, PoissonPrior):
        # Touchard argument is gamma * e^{-a}: the derivatives of
        # exp(gamma (e^{-t} - 1)) are (-1)^n exp(...) T_n(gamma e^{-t}).
        x = prior.intensity * math.exp(-a)
        try:
            return specfun.touchard(y + 1, x) / specfun.touchard(y, x)
        except DomainError as exc:
            raise UnsupportedOrderError(str(exc)) from exc
    raise UnsupportedRouteError(f"no closed form for the {prior.family} family")


# -- empirical Bayes -------------------------------------------------------------------

def empirical_bayes_mean(counts: EmpiricalCounts, params: ChannelParams, y: int,
                         add_one: bool = False) -> float:
    """Robbins plug-in ((y+1) N_{y+1} / N_y - lam) / a.

    ``add_one`` replaces N_y by N_y + 1 throughout (off by default).
    """
    n_y = counts.get(y)
    n_next = counts.get(y + 1)
    if add_one:
        n_y, n_next = n_y + 1, n_next + 1
    if n_y == 0:
        raise NoObservationsError(f"no observations at y = {y}")
    return ((y + 1) * n_next / n_y - params.lam) / params.a


# -- curves ---------------------------------------------------------------------------

def estimator_curve(prior: Prior, params: ChannelParams, route: Route | str, y_max: int,
                    k: int = 1, pmf: OutputPmf | None = None) -> EstimatorCurve:
    """E[X^k | Y=y] for y = 0..y_max along one route.

    Routes other than ``direct`` and ``product`` are defined for k = 1 only;
    the product route returns moments of X obtained from those of U when
    lam = 0 (otherwise it reports U-moments through ``posterior_moment_product``).
    """
    route = Route(route)
    if k < 1:
        raise DomainError("k must be a positive integer")
    if route is Route.DIRECT:
        vals = [posterior_moment_direct(prior, params, y, k) for y in range(y_max + 1)]
    elif route is Route.PRODUCT:
        if params.lam != 0 and k > 1:
            raise UnsupportedRouteError("product route gives X-moments only for lambda = 0")
        if pmf is None:
            from .channel import output_pmf

            pmf = output_pmf(prior, params, y_max=max(y_max + k, _auto(prior, params)))
        vals = [posterior_moment_product(prior, params, y, k, pmf) / params.a ** k
                - (params.lam / params.a if k == 1 else 0.0) for y in range(y_max + 1)]
    else:
        if k != 1:
            raise UnsupportedRouteError(f"{route.value} route evaluates first moments only")
        if route is Route.TGR:
            if pmf is None:
                from .channel import output_pmf

                pmf = output_pmf(prior, params, y_max=max(y_max + 1, _auto(prior, params)))
            vals = [posterior_mean_tgr(pmf, y) for y in range(y_max + 1)]
        elif route is Route.LAPLACE:
            vals = [posterior_mean_laplace(prior, params, y) for y in range(y_max + 1)]
        elif route is Route.CLOSED_FORM:
            vals = [closed_form_mean(prior, params, y) for y in range(y_max + 1)]
        else:
            raise UnsupportedRouteError("empirical curves come from empirical_bayes_mean")
    return EstimatorCurve(k, tuple(float(v) for v in vals), route.value, params)


def _auto(prior, params):
    from .channel import auto_y_max

    try:
        return auto_y_max(prior, params)
    except (MomentError, TruncationError):
        return 0
