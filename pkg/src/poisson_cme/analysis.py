"""Analytic properties of the conditional mean and their numerical checks.

Covers parameter derivatives of posterior moments, the large dark-current
limit, growth envelopes, the explicit O(y log y) bound, and the gamma
linearity diagnostics (least-squares fit, gamma surrogate, characteristic
function gap and Levy distance).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .channel import ChannelParams, OutputPmf, output_pmf
from .errors import (
    DegenerateFitError,
    DomainError,
    LinearityViolation,
    TruncationError,
    UnsupportedOrderError,
)
from .estimator import (
    _first_moments,
    _log_binomial_sum,
    posterior_mean_direct,
    posterior_moment_direct,
    posterior_variance,
)
from .priors import Gamma, Prior

__all__ = [
    "finite_difference",
    "dmean_dlambda",
    "gradient_identity_residual",
    "moment_gradient_residual",
    "lambda_limit",
    "GrowthDiagnostic",
    "growth_ratio",
    "explicit_growth_bound",
    "LinearFit",
    "GammaSurrogate",
    "IntensityLaw",
    "fit_linear",
    "linearity_theorem_check",
    "char_gap",
    "levy_distance",
    "linearity_report",
    "contamination_prior",
    "orthogonality_residual",
]

FD_REL_STEP = 1e-4


# -- finite differences ------------------------------------------------------------

def finite_difference(f: Callable[[float], float], p: float, *, lower: float | None = None) -> float:
    """df/dp by central differences with one Richardson level.

    The step is ``1e-4 * max(1, p)``.  When ``p - 2h`` would cross ``lower``
    (e.g. lambda close to 0) a one-sided three-point stencil is used instead,
    again with one level of extrapolation.
    """
    h = FD_REL_STEP * max(1.0, abs(p))
    if lower is not None and p - 2 * h < lower:
        def d(step):
            return (-3 * f(p) + 4 * f(p + step) - f(p + 2 * step)) / (2 * step)
    else:
        def d(step):
            return (f(p + step) - f(p - step)) / (2 * step)
    return (4 * d(h / 2) - d(h)) / 3


def _fd_a(g: Callable[[ChannelParams], float], params: ChannelParams) -> float:
    return finite_difference(lambda v: g(params.with_(a=v)), params.a, lower=0.0)


def _fd_lam(g: Callable[[ChannelParams], float], params: ChannelParams) -> float:
    return finite_difference(lambda v: g(params.with_(lam=v)), params.lam, lower=0.0)


# -- derivative identities -----------------------------------------------------------

def dmean_dlambda(prior: Prior, params: ChannelParams, y: int) -> float:
    """dE[X|Y=y]/dlam from the conditional variance at y - 1.

    a dE[X|Y=y]/dlam = -y V(U|Y=y-1) / E[U|Y=y-1]^2 for y >= 1 and 0 at y = 0.
    """
    if y < 0:
        raise DomainError("y must be nonnegative")
    if y == 0:
        return 0.0
    m_prev = _first_moments(prior, params, y - 1, 1, None)[0]
    v_prev = posterior_variance(prior, params, y - 1)
    return -y * v_prev / (m_prev * m_prev) / params.a


def gradient_identity_residual(prior: Prior, params: ChannelParams, y: int) -> float:
    """|a dE/da + lam dE/dlam + a V(X|Y=y)| with E = E[X|Y=y] differenced numerically."""
    if params.lam <= 0:
        raise DomainError("the dark-current derivative needs lam > 0")

    def g(p):
        return posterior_mean_direct(prior, p, y)

    lhs = params.a * _fd_a(g, params) + params.lam * _fd_lam(g, params)
    rhs = -params.a * posterior_variance(prior, params, y, of="X")
    return abs(lhs - rhs)


def _moment_lam_derivative(prior: Prior, params: ChannelParams, y: int, k: int) -> float:
    """Analytic dE[U^k|Y=y]/dlam."""
    if y == 0:
        return k * posterior_moment_direct(prior, params, 0, k - 1, of="U")
    m_k = posterior_moment_direct(prior, params, y, k, of="U")
    m_km1 = posterior_moment_direct(prior, params, y, k - 1, of="U")
    m_prev = posterior_moment_direct(prior, params, y - 1, 1, of="U")
    return ((y + k) * m_km1 * m_prev - y * m_k) / m_prev


def moment_gradient_residual(prior: Prior, params: ChannelParams, y: int,
                             k: int) -> tuple[float, float]:
    """Residuals of the two higher-moment derivative identities.

    First:  a d/da E[U^k|y] + lam d/dlam E[U^k|y]
            = k E[U^k|y] - E[U^(k+1)|y] + E[U^k|y] E[U|y].
    Second: d/dlam E[U^k|y] against its closed form in lower moments.
    Both left-hand sides are finite differences of the direct route.
    """
    if k < 1:
        raise DomainError("k must be a positive integer")
    if params.lam <= 0:
        raise DomainError("the dark-current derivative needs lam > 0")

    def g(p):
        return posterior_moment_direct(prior, p, y, k, of="U")

    fd_a = _fd_a(g, params)
    fd_l = _fd_lam(g, params)
    m_k = g(params)
    m_k1 = posterior_moment_direct(prior, params, y, k + 1, of="U")
    m_1 = posterior_moment_direct(prior, params, y, 1, of="U")
    rhs60 = k * m_k - m_k1 + m_k * m_1
    res60 = abs(params.a * fd_a + params.lam * fd_l - rhs60)
    res62 = abs(fd_l - _moment_lam_derivative(prior, params, y, k))
    return res60, res62


def lambda_limit(prior: Prior, a: float) -> float:
    """lim_{lam -> inf} E[X|Y=y] = E[X e^{-aX}] / E[e^{-aX}] (any fixed y)."""
    if not a > 0:
        raise DomainError("a must be positive")
    prior.mean()  # raises MomentError when E[X] is infinite

    def num(x):
        with np.errstate(divide="ignore"):
            return np.log(x) - a * x

    return math.exp(prior.log_expect(num) - prior.log_expect(lambda x: -a * np.asarray(x)))


# -- growth ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthDiagnostic:
    y: int
    ratio: float
    laplace_estimate: float | None


def growth_ratio(prior: Prior, params: ChannelParams, y: int,
                 pmf: OutputPmf | None = None) -> GrowthDiagnostic:
    """E[U|Y=y]/(y+1), with the Laplace-derivative estimate
    |L_U^(y+1)(1)| / ((y+1) |L_U^(y)(1)|) when the prior supports it."""
    if y < 0:
        raise DomainError("y must be nonnegative")
    if pmf is not None and y + 1 > pmf.y_max:
        raise TruncationError(f"needs P_Y({y + 1}); pmf stops at {pmf.y_max}")
    m = _first_moments(prior, params, y, 1, pmf)[0]
    estimate = None
    try:
        log_l = [prior.log_abs_laplace_deriv(n, params.a) for n in range(y + 2)]
    except (NotImplementedError, UnsupportedOrderError):
        log_l = None
    if log_l is not None and math.isfinite(log_l[y]):
        # L_U^(n)(1) = e^{-lam} sum_i C(n,i) (-lam)^i a^(n-i) L_X^(n-i)(a); e^{-lam} cancels
        diff = _log_binomial_sum(prior, params, y + 1, log_l) - _log_binomial_sum(prior, params, y, log_l)
        estimate = math.exp(diff) / (y + 1)
    return GrowthDiagnostic(y, m / (y + 1), estimate)


def explicit_growth_bound(prior: Prior, params: ChannelParams, y: int) -> tuple[float, float]:
    """(E[U|Y=y]/2, (y+1)log(y+1) - y E[log U] + E[U] + 1/(2e) + 1)."""
    if y < 0:
        raise DomainError("y must be nonnegative")
    elog = prior.log_moment(params.a, params.lam)
    lhs = posterior_moment_direct(prior, params, y, 1, of="U") / 2.0
    rhs = ((y + 1) * math.log(y + 1) - (y * elog if y else 0.0)
           + params.mean_intensity(prior) + 1.0 / (2.0 * math.e) + 1.0)
    return lhs, rhs


# -- linearity -------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    c1: float
    c2: float
    eps: float


@dataclass(frozen=True)
class GammaSurrogate:
    """Gamma law Gam(rate, shape) for the intensity U."""

    rate: float
    shape: float

    @classmethod
    def from_fit(cls, fit: LinearFit) -> "GammaSurrogate":
        if not 0 < fit.c1 < 1 or not fit.c2 > 0:
            raise DegenerateFitError(f"c1={fit.c1!r}, c2={fit.c2!r} define no gamma law")
        return cls((1.0 - fit.c1) / fit.c1, fit.c2 / fit.c1)

    def as_prior(self) -> Gamma:
        return Gamma(rate=self.rate, shape=self.shape)

    def input_prior(self, a: float) -> Gamma:
        """The law of X = U/a, i.e. Gam(a * rate, shape)."""
        return Gamma(rate=a * self.rate, shape=self.shape)

    def char_fn(self, s: float) -> complex:
        return complex((1 - 1j * s / self.rate) ** (-self.shape))

    def mean(self) -> float:
        return self.shape / self.rate


class _CdfLike(Protocol):
    def cdf_array(self, x: np.ndarray) -> np.ndarray: ...
    def quantile_grid(self, step: float = 1e-3) -> np.ndarray: ...
    def atoms(self) -> np.ndarray: ...


@dataclass(frozen=True)
class IntensityLaw:
    """The law of U = aX + lam induced by a prior on X."""

    prior: Prior
    params: ChannelParams

    def cdf_array(self, u):
        return self.prior.cdf_array((np.asarray(u, dtype=float) - self.params.lam) / self.params.a)

    def quantile_grid(self, step: float = 1e-3):
        return self.params.a * self.prior.quantile_grid(step) + self.params.lam

    def atoms(self):
        return self.params.a * self.prior.atoms() + self.params.lam

    def char_fn(self, s: float) -> complex:
        return complex(np.exp(1j * s * self.params.lam) * self.prior.char_fn(self.params.a * s))

    def mean(self) -> float:
        return self.params.mean_intensity(self.prior)


def fit_linear(prior: Prior, params: ChannelParams, pmf: OutputPmf | None = None) -> LinearFit:
    """Least squares of E[U|Y] on (1, Y) under P_Y weights."""
    prior.second_moment()
    if pmf is None:
        pmf = output_pmf(prior, params, tail_tol=1e-14)
    lp = pmf.log_probs
    ys = np.arange(pmf.y_max)
    w = pmf.probs[:-1]
    keep = w > 0
    if np.count_nonzero(keep) < 2:
        raise DegenerateFitError("P_Y has fewer than two support points; the slope is undefined")
    ys, w = ys[keep], w[keep]
    m = (ys + 1) * np.exp(lp[1:][keep] - lp[:-1][keep])
    wsum = w.sum()
    ybar = (w * ys).sum() / wsum
    mbar = (w * m).sum() / wsum
    var_y = (w * (ys - ybar) ** 2).sum() / wsum
    if not var_y > 0:
        raise DegenerateFitError("P_Y is a point mass; the slope is undefined")
    c1 = float((w * (ys - ybar) * (m - mbar)).sum() / wsum / var_y)
    c2 = float(mbar - c1 * ybar)
    eps = float(math.fsum(w * (m - c1 * ys - c2) ** 2))
    return LinearFit(c1, c2, max(eps, 0.0))


def linearity_theorem_check(fit: LinearFit, params: ChannelParams,
                            eps_tol: float = 1e-10) -> GammaSurrogate:
    """Gamma surrogate of a linear conditional mean.

    An exactly linear E[U|Y] forces lam = 0 and a gamma input; any other
    combination is reported as a LinearityViolation.
    """
    if params.lam > 0:
        raise LinearityViolation(f"the conditional mean cannot be linear with lam = {params.lam}")
    if not fit.eps < eps_tol:
        raise LinearityViolation(f"fit residual eps = {fit.eps:.3g} is not below {eps_tol:g}")
    return GammaSurrogate.from_fit(fit)


def default_s_grid() -> np.ndarray:
    return np.logspace(-3, 3, 2000)


def char_gap(law_u, surrogate: GammaSurrogate, s_grid: Sequence[float] | None = None) -> float:
    """sup_s |phi_U(s) - phi_gamma(s)| / s over a grid plus the s -> 0 limit."""
    grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise DomainError("s_grid must contain positive finite values")
    gap = abs(law_u.mean() - surrogate.mean())
    for s in grid:
        gap = max(gap, abs(law_u.char_fn(float(s)) - surrogate.char_fn(float(s))) / s)
    return float(gap)


_ATOM_NUDGE = 1e-9


def _levy_grid(p: _CdfLike, q: _CdfLike) -> tuple[np.ndarray, np.ndarray]:
    base = np.concatenate([p.quantile_grid(1e-4), q.quantile_grid(1e-4)])
    jumps = np.concatenate([p.atoms(), q.atoms()])
    return np.unique(np.concatenate([base, jumps, jumps - _ATOM_NUDGE])), jumps


def _sandwich_holds(p: _CdfLike, q: _CdfLike, h: float, base: np.ndarray, jumps: np.ndarray) -> bool:
    shifted = np.concatenate([jumps + h, jumps - h, jumps + h - _ATOM_NUDGE,
                              jumps - h - _ATOM_NUDGE])
    x = np.unique(np.concatenate([base, base + h, base - h, shifted]))
    px = p.cdf_array(x)
    lower = q.cdf_array(x - h) - h
    upper = q.cdf_array(x + h) + h
    return bool(np.all(lower <= px + 1e-15) and np.all(px <= upper + 1e-15))


def levy_distance(p: _CdfLike, q: _CdfLike, tol: float = 1e-6) -> float:
    """Smallest h with Q(x-h) - h <= P(x) <= Q(x+h) + h on a dense grid.

    The grid joins both quantile grids (step 1e-4) with the atoms of either
    law and a point just left of every atom; bisection on h stops at ``tol``.
    """
    base, jumps = _levy_grid(p, q)
    lo, hi = 0.0, 1.0
    if _sandwich_holds(p, q, 0.0, base, jumps):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _sandwich_holds(p, q, mid, base, jumps):
            hi = mid
        else:
            lo = mid
    return hi


def contamination_prior(delta: float, base: Prior | None = None, point: float = 3.0) -> Prior:
    """(1 - delta) Gam(1,1) + delta * Degenerate(point)."""
    from .priors import Degenerate, Mixture

    base = Gamma(rate=1.0, shape=1.0) if base is None else base
    return Mixture(components=(base, Degenerate(point)), weights=(1.0 - delta, delta))


@dataclass(frozen=True)
class LinearityReport:
    c1: float
    c2: float
    eps: float
    surrogate: dict
    char_gap: float
    levy_bound_rhs: float
    levy_distance: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def linearity_report(prior: Prior, params: ChannelParams) -> LinearityReport:
    """Fit, surrogate and both stability distances for one configuration."""
    fit = fit_linear(prior, params)
    sur = GammaSurrogate.from_fit(fit)
    law = IntensityLaw(prior, params)
    gap = char_gap(law, sur)
    dist = levy_distance(law, sur.as_prior())
    rhs = math.sqrt(fit.eps) / (1.0 - fit.c1)
    return LinearityReport(fit.c1, fit.c2, fit.eps, {"rate": sur.rate, "shape": sur.shape},
                           gap, rhs, dist)


def orthogonality_residual(prior: Prior, params: ChannelParams, c1: float, c2: float,
                           t: float, pmf: OutputPmf | None = None) -> float:
    """|E[(U - c1 Y - c2) e^{-tY}] + (c1 (s-1) + 1) L_U'(s) + c2 L_U(s)| with s = 1 - e^{-t}.

    The left side is summed over the output pmf using E[U e^{-tY}] =
    E[E[U|Y] e^{-tY}]; the right side uses the Laplace transform of the prior.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if pmf is None:
        pmf = output_pmf(prior, params, tail_tol=1e-14)
    lp = pmf.log_probs
    ys = np.arange(pmf.y_max)
    w = pmf.probs[:-1]
    keep = w > 0
    m = (ys[keep] + 1) * np.exp(lp[1:][keep] - lp[:-1][keep])
    lhs = math.fsum(w[keep] * (m - c1 * ys[keep] - c2) * np.exp(-t * ys[keep]))
    s = -math.expm1(-t)
    a, lam = params.a, params.lam
    l0 = prior.laplace_deriv(0, a * s)
    l1 = prior.laplace_deriv(1, a * s)
    lu = math.exp(-lam * s) * l0
    dlu = -lam * lu + a * math.exp(-lam * s) * l1
    rhs = -(c1 * (s - 1.0) + 1.0) * dlu - c2 * lu
    return abs(lhs - rhs)
