"""Input distributions for the Poisson channel.

Every prior is a frozen dataclass exposing closed-form moments, Laplace
transform derivatives, the characteristic function, the CDF, sampling and a
log-domain expectation engine ``log_expect`` used by every quadrature-backed
computation in the package.

Gamma parametrization follows the rate/shape convention: ``Gamma(rate=a,
shape=t)`` has density ``a^t x^(t-1) e^(-a x) / Gamma(t)`` and mean ``t / a``.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import quadrature, specfun
from .errors import (
    DivergenceError,
    DomainError,
    MomentError,
    UnsupportedOrderError,
)

__all__ = [
    "Prior",
    "Gamma",
    "InverseGamma",
    "Uniform",
    "Bernoulli",
    "PoissonPrior",
    "Discrete",
    "Degenerate",
    "Mixture",
    "exponential",
    "prior_from_dict",
    "prior_from_json",
    "MAX_DISCRETE_ATOMS",
    "INVERSE_GAMMA_MAX_ORDER",
]

LogFn = Callable[[np.ndarray], np.ndarray]

MAX_DISCRETE_ATOMS = 100_000
INVERSE_GAMMA_MAX_ORDER = 50
_DROP = 46.0  # log-units below the peak treated as negligible (~1e-20)


class Prior:
    """Common interface; concrete families override the closed forms."""

    family: str = "abstract"
    is_discrete: bool = False

    # -- moments ---------------------------------------------------------
    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        m = self.mean()
        return self.variance() + m * m

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def has_atom_at_zero(self) -> bool:
        return False

    # -- transforms ------------------------------------------------------
    def log_abs_laplace_deriv(self, n: int, t: float) -> float:
        """log |d^n/dt^n E[exp(-tX)]|.  The sign is always (-1)^n."""
        raise NotImplementedError

    def laplace_deriv(self, n: int, t: float) -> float:
        n = _check_order(n)
        mag = math.exp(self.log_abs_laplace_deriv(n, t))
        return -mag if n % 2 else mag

    def char_fn(self, s: float) -> complex:
        re = self.expect(lambda x: np.cos(s * x))
        im = self.expect(lambda x: np.sin(s * x))
        return complex(re, im)

    # -- distribution ----------------------------------------------------
    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def cdf_array(self, x: np.ndarray) -> np.ndarray:
        """Vectorised cdf; subclasses override the scalar loop."""
        return np.array([self.cdf(float(v)) for v in np.asarray(x, dtype=float)])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def quantile_grid(self, step: float = 1e-3) -> np.ndarray:
        """Points at quantile levels step, 2 step, ..., 1 - step plus atoms."""
        raise NotImplementedError

    def atoms(self) -> np.ndarray:
        return np.empty(0)

    # -- expectations ----------------------------------------------------
    def log_expect(self, logf: LogFn, hints: Sequence[float] = ()) -> float:
        """log E[exp(logf(X))] for a vectorised log-integrand ``logf``.

        ``hints`` are locations where ``logf`` is expected to peak; they help
        the continuous-family quadrature find the bulk of the integrand.
        """
        raise NotImplementedError

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """E[f(X)] for a signed, well-behaved f."""
        raise NotImplementedError

    def log_moment(self, a: float, lam: float) -> float:
        """E[log(aX + lam)]."""
        if lam == 0 and self.has_atom_at_zero():
            raise DivergenceError("E[log(aX)] diverges: prior has mass at 0 and lambda = 0")
        return self.expect(lambda x: np.log(a * np.asarray(x) + lam))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_order(n: int) -> int:
    if n < 0 or int(n) != n:
        raise DomainError(f"derivative order must be a nonnegative integer, got {n!r}")
    return int(n)


# -- continuous families -------------------------------------------------------

class _Continuous(Prior):
    """Quadrature machinery shared by the density-based families."""

    def _frozen(self):
        raise NotImplementedError

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return self._frozen().logpdf(x)

    def cdf(self, x: float) -> float:
        return float(self._frozen().cdf(x))

    def cdf_array(self, x):
        return np.asarray(self._frozen().cdf(np.asarray(x, dtype=float)), dtype=float)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n < 1:
            raise DomainError("sample size must be positive")
        return np.asarray(self._frozen().rvs(size=n, random_state=rng), dtype=float)

    def quantile_grid(self, step: float = 1e-3) -> np.ndarray:
        levels = np.arange(step, 1.0, step)
        return np.asarray(self._frozen().ppf(levels), dtype=float)

    def _bulk_points(self) -> np.ndarray:
        lo, hi = self.support()
        levels = np.concatenate(
            [10.0 ** np.arange(-15, -1), np.linspace(0.02, 0.98, 49), 1 - 10.0 ** np.arange(-2, -16, -1)]
        )
        pts = np.asarray(self._frozen().ppf(levels), dtype=float)
        pts = pts[np.isfinite(pts)]
        return np.unique(pts[(pts > lo) & (pts < hi)])

    def _log_space(self) -> bool:
        lo, hi = self.support()
        return lo == 0.0 and hi == math.inf

    def _probe(self, hints: Sequence[float]) -> np.ndarray:
        lo, hi = self.support()
        pts = [self._bulk_points()]
        hints = np.asarray([h for h in hints if math.isfinite(h) and lo < h < hi], dtype=float)
        if hints.size:
            pts.append(np.concatenate([hints * f for f in (0.5, 0.8, 0.95, 1.0, 1.05, 1.25, 2.0, 4.0)]))
        if not self._log_space():
            pts.append(np.linspace(lo, hi, 34)[1:-1])
        grid = np.unique(np.concatenate(pts))
        return grid[(grid > lo) & (grid < hi)]

    def log_expect(self, logf: LogFn, hints: Sequence[float] = ()) -> float:
        probe = self._probe(hints)
        if self._log_space():
            def G(u):
                x = np.exp(u)
                return self.logpdf(x) + logf(x) + u

            return quadrature.log_integrate(G, -math.inf, math.inf, np.log(probe))
        lo, hi = self.support()
        return quadrature.log_integrate(lambda x: self.logpdf(x) + logf(x), lo, hi, probe)

    def expect(self, f) -> float:
        lo, hi = self.support()
        probe = self._probe(())
        if self._log_space():
            def G(u):
                return self.logpdf(np.exp(u)) + u

            a, b = _window(G, np.log(probe))

            def h(u):
                x = np.exp(u)
                return np.asarray(f(x), dtype=float) * np.exp(G(u))
        else:
            a, b = lo, hi

            def h(x):
                return np.asarray(f(x), dtype=float) * np.exp(self.logpdf(x))
        edges = np.unique(np.concatenate([[a], np.log(probe) if self._log_space() else probe, [b]]))
        edges = edges[(edges >= a) & (edges <= b)]
        total = 0.0
        for left, right in zip(edges[:-1], edges[1:]):
            v, _ = quadrature.gk15(h, float(left), float(right), rtol=1e-13, atol=1e-17, panels=2)
            total += v
        return total


def _window(G, probe: np.ndarray) -> tuple[float, float]:
    vals = G(probe)
    gmax = float(np.max(vals))
    lo_i = int(np.argmax(vals))
    a = quadrature._edge(G, float(probe[lo_i]), gmax, -math.inf, -1.0, probe)
    b = quadrature._edge(G, float(probe[lo_i]), gmax, math.inf, 1.0, probe)
    return min(a, float(probe[0])), max(b, float(probe[-1]))


@dataclass(frozen=True)
class Gamma(_Continuous):
    rate: float
    shape: float
    family: str = field(default="gamma", init=False, repr=False)

    def __post_init__(self):
        if not (self.rate > 0 and self.shape > 0):
            raise DomainError("Gamma requires rate > 0 and shape > 0")

    def _frozen(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (self.shape * math.log(self.rate) - math.lgamma(self.shape)
                 + (self.shape - 1.0) * np.log(x) - self.rate * x)
        return np.where(x > 0, v, -np.inf)

    def support(self):
        return (0.0, math.inf)

    def mean(self):
        return self.shape / self.rate

    def variance(self):
        return self.shape / self.rate ** 2

    def log_abs_laplace_deriv(self, n, t):
        n = _check_order(n)
        if not t > -self.rate:
            raise DomainError("Gamma Laplace transform requires t > -rate")
        return (-n * math.log(self.rate) - (n + self.shape) * math.log1p(t / self.rate)
                + math.lgamma(self.shape + n) - math.lgamma(self.shape))

    def char_fn(self, s):
        return complex((1 - 1j * s / self.rate) ** (-self.shape))

    def log_moment(self, a, lam):
        if lam == 0:
            return specfun.digamma(self.shape) - math.log(self.rate) + math.log(a)
        return super().log_moment(a, lam)

    def sample(self, rng, n):
        if n < 1:
            raise DomainError("sample size must be positive")
        return rng.gamma(self.shape, 1.0 / self.rate, size=n)

    def to_dict(self):
        return {"family": "gamma", "rate": self.rate, "shape": self.shape}


def exponential(rate: float) -> Gamma:
    return Gamma(rate=rate, shape=1.0)


@dataclass(frozen=True)
class InverseGamma(_Continuous):
    """Density beta^alpha x^(-alpha-1) e^(-beta/x) / Gamma(alpha)."""

    shape: float
    scale: float
    family: str = field(default="inverse_gamma", init=False, repr=False)

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("InverseGamma requires shape > 0 and scale > 0")

    def _frozen(self):
        return stats.invgamma(self.shape, scale=self.scale)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (self.shape * math.log(self.scale) - math.lgamma(self.shape)
                 - (self.shape + 1.0) * np.log(x) - self.scale / x)
        return np.where(x > 0, v, -np.inf)

    def support(self):
        return (0.0, math.inf)

    def mean(self):
        if self.shape <= 1:
            raise MomentError("InverseGamma mean requires shape > 1")
        return self.scale / (self.shape - 1)

    def variance(self):
        if self.shape <= 2:
            raise MomentError("InverseGamma variance requires shape > 2")
        return self.scale ** 2 / ((self.shape - 1) ** 2 * (self.shape - 2))

    def log_abs_laplace_deriv(self, n, t):
        n = _check_order(n)
        if not t > 0:
            raise DomainError("InverseGamma Laplace derivatives require t > 0")
        nu = self.shape - n
        if abs(nu) > INVERSE_GAMMA_MAX_ORDER:
            raise UnsupportedOrderError(
                f"Bessel order |{nu}| exceeds {INVERSE_GAMMA_MAX_ORDER}")
        z = math.sqrt(4.0 * self.scale * t)
        return (self.shape * math.log(self.scale) - math.lgamma(self.shape) + math.log(2.0)
                + specfun.log_bessel_k(nu, z) + 0.5 * (n - self.shape) * math.log(self.scale / t))

    def log_moment(self, a, lam):
        if lam == 0:
            return math.log(self.scale) - specfun.digamma(self.shape) + math.log(a)
        return super().log_moment(a, lam)

    def to_dict(self):
        return {"family": "inverse_gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Uniform(_Continuous):
    low: float
    high: float
    family: str = field(default="uniform", init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.low < self.high):
            raise DomainError("Uniform requires 0 <= low < high")

    def _frozen(self):
        return stats.uniform(self.low, self.high - self.low)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, -math.log(self.high - self.low), -np.inf)

    def support(self):
        return (self.low, self.high)

    def mean(self):
        return 0.5 * (self.low + self.high)

    def variance(self):
        return (self.high - self.low) ** 2 / 12.0

    def log_abs_laplace_deriv(self, n, t):
        n = _check_order(n)
        c, b = self.low, self.high
        if t == 0:
            return math.log((b ** (n + 1) - c ** (n + 1)) / ((n + 1) * (b - c)))
        if t < 0:
            raise DomainError("Uniform Laplace derivatives implemented for t >= 0")
        return (specfun.log_incomplete_gamma_interval(n + 1, c * t, b * t)
                - (n + 1) * math.log(t) - math.log(b - c))

    def char_fn(self, s):
        if s == 0:
            return 1 + 0j
        c, b = self.low, self.high
        return (cmath.exp(1j * s * b) - cmath.exp(1j * s * c)) / (1j * s * (b - c))

    def log_moment(self, a, lam):
        if lam == 0:
            c, b = self.low, self.high
            clogc = 0.0 if c == 0 else c * math.log(c)
            return (b * math.log(b) - clogc) / (b - c) - 1.0 + math.log(a)
        return super().log_moment(a, lam)

    def to_dict(self):
        return {"family": "uniform", "low": self.low, "high": self.high}


# -- discrete families -----------------------------------------------------------

class _Atomic(Prior):
    """Finitely supported priors; expectations are exact log-sum-exps."""

    is_discrete = True

    def _atoms(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def atoms(self):
        return self._atoms()[0]

    def support(self):
        x, _ = self._atoms()
        return (float(x[0]), float(x[-1]))

    def has_atom_at_zero(self):
        x, _ = self._atoms()
        return bool(x[0] == 0.0)

    def mean(self):
        x, p = self._atoms()
        return math.fsum(x * p)

    def variance(self):
        x, p = self._atoms()
        m = self.mean()
        return math.fsum(p * (x - m) ** 2)

    def log_expect(self, logf, hints=()):
        x, p = self._atoms()
        with np.errstate(divide="ignore"):
            return specfun.logsumexp(np.log(p) + logf(x))

    def expect(self, f):
        x, p = self._atoms()
        return math.fsum(p * np.asarray(f(x), dtype=float))

    def log_abs_laplace_deriv(self, n, t):
        n = _check_order(n)
        x, p = self._atoms()
        with np.errstate(divide="ignore"):
            powers = n * np.log(x) if n > 0 else np.zeros_like(x)
            return specfun.logsumexp(np.log(p) + powers - t * x)

    def char_fn(self, s):
        x, p = self._atoms()
        return complex(np.sum(p * np.exp(1j * s * x)))

    def cdf(self, x):
        xs, p = self._atoms()
        return float(min(1.0, math.fsum(p[xs <= x])))

    def cdf_array(self, x):
        xs, p = self._atoms()
        cum = np.concatenate([[0.0], np.minimum(np.cumsum(p), 1.0)])
        return cum[np.searchsorted(xs, np.asarray(x, dtype=float), side="right")]

    def sample(self, rng, n):
        if n < 1:
            raise DomainError("sample size must be positive")
        xs, p = self._atoms()
        return xs[rng.choice(xs.size, size=n, p=p / p.sum())]

    def quantile_grid(self, step=1e-3):
        return self.atoms()


@dataclass(frozen=True)
class Discrete(_Atomic):
    """Finite mixture of point masses; atoms given as (location, weight) pairs."""

    points: tuple[tuple[float, float], ...]
    family: str = field(default="discrete", init=False, repr=False)

    def __post_init__(self):
        pts = tuple(sorted((float(x), float(w)) for x, w in self.points))
        if not pts:
            raise DomainError("Discrete prior needs at least one atom")
        if len(pts) > MAX_DISCRETE_ATOMS:
            raise DomainError(f"Discrete prior capped at {MAX_DISCRETE_ATOMS} atoms")
        xs = [x for x, _ in pts]
        if any(x < 0 for x in xs):
            raise DomainError("atoms must be nonnegative")
        if len(set(xs)) != len(xs):
            raise DomainError("atoms must be distinct")
        if any(not w > 0 for _, w in pts):
            raise DomainError("atom weights must be positive")
        if abs(math.fsum(w for _, w in pts) - 1.0) > 1e-12:
            raise DomainError("atom weights must sum to 1")
        object.__setattr__(self, "points", pts)

    def _atoms(self):
        x = np.array([x for x, _ in self.points])
        p = np.array([w for _, w in self.points])
        return x, p

    def to_dict(self):
        return {"family": "discrete", "atoms": [[x, w] for x, w in self.points]}


@dataclass(frozen=True)
class Degenerate(_Atomic):
    value: float
    family: str = field(default="degenerate", init=False, repr=False)

    def __post_init__(self):
        if not self.value >= 0:
            raise DomainError("Degenerate value must be nonnegative")

    def _atoms(self):
        return np.array([float(self.value)]), np.array([1.0])

    def mean(self):
        return float(self.value)

    def variance(self):
        return 0.0

    def char_fn(self, s):
        return cmath.exp(1j * s * self.value)

    def sample(self, rng, n):
        if n < 1:
            raise DomainError("sample size must be positive")
        return np.full(n, float(self.value))

    def to_dict(self):
        return {"family": "degenerate", "value": self.value}


@dataclass(frozen=True)
class Bernoulli(_Atomic):
    p: float
    family: str = field(default="bernoulli", init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise DomainError("Bernoulli requires 0 <= p <= 1")

    def _atoms(self):
        if self.p == 0:
            return np.array([0.0]), np.array([1.0])
        if self.p == 1:
            return np.array([1.0]), np.array([1.0])
        return np.array([0.0, 1.0]), np.array([1.0 - self.p, self.p])

    def mean(self):
        return float(self.p)

    def variance(self):
        return self.p * (1.0 - self.p)

    def log_abs_laplace_deriv(self, n, t):
        n = _check_order(n)
        if n == 0:
            return math.log(1.0 - self.p + self.p * math.exp(-t))
        if self.p == 0:
            return -math.inf
        return math.log(self.p) - t

    def char_fn(self, s):
        return (1.0 - self.p) + self.p * cmath.exp(1j * s)

    def sample(self, rng, n):
        if n < 1:
            raise DomainError("sample size must be positive")
        return (rng.random(n) < self.p).astype(float)

    def to_dict(self):
        return {"family": "bernoulli", "p": self.p}


@dataclass(frozen=True)
class PoissonPrior(Prior):
    """X ~ Poisson(mean) on the nonnegative integers."""

    intensity: float
    family: str = field(default="poisson", init=False, repr=False)
    is_discrete = True

    def __post_init__(self):
        if not self.intensity > 0:
            raise DomainError("Poisson prior requires mean > 0")

    def support(self):
        return (0.0, math.inf)

    def has_atom_at_zero(self):
        return True

    def mean(self):
        return float(self.intensity)

    def variance(self):
        return float(self.intensity)

    def _base_cutoff(self) -> int:
        g = self.intensity
        return int(math.ceil(g + 12.0 * math.sqrt(g) + 40.0))

    def log_expect(self, logf, hints=()):
        k_max = max([self._base_cutoff()] + [int(2 * h) + 10 for h in hints if math.isfinite(h)])
        while True:
            k = np.arange(k_max + 1, dtype=float)
            with np.errstate(divide="ignore"):
                terms = stats.poisson.logpmf(k, self.intensity) + logf(k)
            total = specfun.logsumexp(terms)
            tail = terms[-max(5, k_max // 20):]
            if total == -math.inf or np.max(tail) < total - _DROP:
                return total
            k_max *= 2
            if k_max > 10 ** 7:
                raise DomainError("Poisson prior expectation failed to converge")

    def expect(self, f):
        k = np.arange(self._base_cutoff() + 1, dtype=float)
        return math.fsum(stats.poisson.pmf(k, self.intensity) * np.asarray(f(k), dtype=float))

    def log_abs_laplace_deriv(self, n, t):
        n = _check_order(n)
        try:
            tn = specfun.touchard(n, self.intensity * math.exp(-t))
        except DomainError as exc:
            raise UnsupportedOrderError(str(exc)) from exc
        return self.intensity * math.expm1(-t) + math.log(tn)

    def char_fn(self, s):
        return cmath.exp(self.intensity * (cmath.exp(1j * s) - 1.0))

    def cdf(self, x):
        return float(stats.poisson.cdf(math.floor(x), self.intensity)) if x >= 0 else 0.0

    def cdf_array(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, stats.poisson.cdf(np.floor(np.maximum(x, 0)), self.intensity), 0.0)

    def sample(self, rng, n):
        if n < 1:
            raise DomainError("sample size must be positive")
        return rng.poisson(self.intensity, size=n).astype(float)

    def atoms(self):
        return np.arange(self._base_cutoff() + 1, dtype=float)

    def quantile_grid(self, step=1e-3):
        return self.atoms()

    def log_moment(self, a, lam):
        if lam == 0:
            raise DivergenceError("E[log(aX)] diverges: prior has mass at 0 and lambda = 0")
        return self.expect(lambda x: np.log(a * x + lam))

    def to_dict(self):
        return {"family": "poisson", "mean": self.intensity}


@dataclass(frozen=True)
class Mixture(Prior):
    """Finite mixture of priors, e.g. a contaminated gamma."""

    components: tuple[Prior, ...]
    weights: tuple[float, ...]
    family: str = field(default="mixture", init=False, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        w = tuple(float(v) for v in self.weights)
        if not comps or len(comps) != len(w):
            raise DomainError("Mixture needs matching components and weights")
        if any(not v > 0 for v in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise DomainError("Mixture weights must be positive and sum to 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def is_discrete(self):  # type: ignore[override]
        return all(c.is_discrete for c in self.components)

    def support(self):
        sup = [c.support() for c in self.components]
        return (min(s[0] for s in sup), max(s[1] for s in sup))

    def has_atom_at_zero(self):
        return any(c.has_atom_at_zero() for c in self.components)

    def mean(self):
        return math.fsum(w * c.mean() for w, c in zip(self.weights, self.components))

    def second_moment(self):
        return math.fsum(w * c.second_moment() for w, c in zip(self.weights, self.components))

    def variance(self):
        m = self.mean()
        return self.second_moment() - m * m

    def _combine(self, logs: Iterable[float]) -> float:
        return specfun.logsumexp([math.log(w) + v for w, v in zip(self.weights, logs)])

    def log_expect(self, logf, hints=()):
        return self._combine(c.log_expect(logf, hints) for c in self.components)

    def expect(self, f):
        return math.fsum(w * c.expect(f) for w, c in zip(self.weights, self.components))

    def log_abs_laplace_deriv(self, n, t):
        return self._combine(c.log_abs_laplace_deriv(n, t) for c in self.components)

    def char_fn(self, s):
        return sum(w * c.char_fn(s) for w, c in zip(self.weights, self.components))

    def cdf(self, x):
        return math.fsum(w * c.cdf(x) for w, c in zip(self.weights, self.components))

    def cdf_array(self, x):
        return sum(w * c.cdf_array(x) for w, c in zip(self.weights, self.components))

    def log_moment(self, a, lam):
        return math.fsum(w * c.log_moment(a, lam) for w, c in zip(self.weights, self.components))

    def sample(self, rng, n):
        if n < 1:
            raise DomainError("sample size must be positive")
        which = rng.choice(len(self.components), size=n, p=np.asarray(self.weights))
        out = np.empty(n)
        for j, comp in enumerate(self.components):
            mask = which == j
            if mask.any():
                out[mask] = comp.sample(rng, int(mask.sum()))
        return out

    def atoms(self):
        parts = [c.atoms() for c in self.components if c.is_discrete]
        return np.unique(np.concatenate(parts)) if parts else np.empty(0)

    def quantile_grid(self, step=1e-3):
        return np.unique(np.concatenate([c.quantile_grid(step) for c in self.components]))

    def to_dict(self):
        return {
            "family": "mixture",
            "components": [c.to_dict() for c in self.components],
            "weights": list(self.weights),
        }


# -- parsing ---------------------------------------------------------------------

def prior_from_dict(spec: dict) -> Prior:
    """Build a prior from its JSON description, e.g. ``{"family": "gamma",
    "rate": 3.0, "shape": 1.0}``."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise DomainError("prior spec must be an object with a 'family' field")
    fam = str(spec["family"]).lower()
    try:
        if fam == "gamma":
            return Gamma(rate=float(spec["rate"]), shape=float(spec["shape"]))
        if fam == "exponential":
            return exponential(float(spec["rate"]))
        if fam == "inverse_gamma":
            return InverseGamma(shape=float(spec["shape"]), scale=float(spec["scale"]))
        if fam == "uniform":
            return Uniform(low=float(spec["low"]), high=float(spec["high"]))
        if fam == "bernoulli":
            return Bernoulli(p=float(spec["p"]))
        if fam == "poisson":
            return PoissonPrior(intensity=float(spec["mean"]))
        if fam == "degenerate":
            return Degenerate(value=float(spec["value"]))
        if fam == "discrete":
            return Discrete(points=tuple((float(x), float(w)) for x, w in spec["atoms"]))
        if fam == "mixture":
            return Mixture(
                components=tuple(prior_from_dict(c) for c in spec["components"]),
                weights=tuple(float(w) for w in spec["weights"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"malformed {fam} prior spec: {exc}") from exc
    raise DomainError(f"unknown prior family {fam!r}")


def prior_from_json(text: str) -> Prior:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"prior spec is not valid JSON: {exc}") from exc
    return prior_from_dict(data)
