"""Poisson score functions, Fisher information and the MMSE identity.

Sign convention.  The score is rho_po(y) = -(a d/da + lam d/dlam) log P_Y(y).
Combining this definition with a dP/da + lam dP/dlam = y P(y) - (y+1) P(y+1)
gives

    rho_po(y) = ((y+1) P(y+1) - y P(y)) / P(y) = rho_fwd(y) = E[U | Y=y] - y,

so the forward-difference score equals rho_po (not its negative) and the
gradient components satisfy a * rho_scale + lam * rho_dc = -rho_po.  The
backward score is rho_bwd = (P(y) - P(y-1)) / P(y) = -rho_dc.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelParams, OutputPmf, output_pmf
from .errors import DegenerateEvidenceError, DomainError, TruncationError
from .estimator import posterior_variance
from .priors import Prior

__all__ = [
    "ScoreValues",
    "score",
    "alt_scores",
    "fisher_info",
    "fisher_information",
    "mmse",
    "mmse_with_remainder",
    "brown_residual",
    "score_pmf",
]

_FISHER_TAIL = 1e-14
_FISHER_RUN = 5


@dataclass(frozen=True)
class ScoreValues:
    y: int
    rho_po: float
    rho_scale: float
    rho_dc: float
    rho_fwd: float
    rho_bwd: float
    outside_tweedie_range: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _p(pmf: OutputPmf, y: int) -> float:
    return 0.0 if y < 0 else pmf.prob(y)


def score(pmf: OutputPmf, y: int) -> ScoreValues:
    if y < 0:
        raise DomainError("y must be nonnegative")
    if y + 1 > pmf.y_max:
        raise TruncationError(f"rho_fwd({y}) needs P_Y({y + 1}); pmf stops at {pmf.y_max}")
    py = pmf.prob(y)
    if py <= 0:
        raise DegenerateEvidenceError(f"P_Y({y}) = 0")
    a, lam = pmf.params.a, pmf.params.lam
    # (y+1) P(y+1)/P(y) through the log domain to avoid underflow in the ratio
    up = (y + 1) * math.exp(pmf.log_prob(y + 1) - pmf.log_prob(y))
    down = math.exp(pmf.log_prob(y - 1) - pmf.log_prob(y)) if y > 0 else 0.0
    rho_fwd = up - y
    rho_bwd = 1.0 - down
    rho_dc = -rho_bwd
    rho_po = rho_fwd
    rho_scale = (-rho_po - lam * rho_dc) / a
    return ScoreValues(y, rho_po, rho_scale, rho_dc, rho_fwd, rho_bwd, outside_tweedie_range=(y == 0))


def alt_scores(pmf: OutputPmf, mean_u: float, y: int) -> tuple[float, float, float]:
    """The three discrete scores (rho_K, rho_KHJ, rho_JG) of a count variable."""
    if not mean_u > 0:
        raise DomainError("E[U] must be positive")
    if y + 1 > pmf.y_max:
        raise TruncationError(f"needs P_Y({y + 1}); pmf stops at {pmf.y_max}")
    lp = pmf.log_prob(y)
    if lp == -math.inf:
        raise DegenerateEvidenceError(f"P_Y({y}) = 0")
    prev_ratio = math.exp(pmf.log_prob(y - 1) - lp) if y > 0 else 0.0
    next_ratio = math.exp(pmf.log_prob(y + 1) - lp)
    rho_k = prev_ratio - 1.0
    rho_khj = (y + 1) * next_ratio / mean_u - 1.0
    rho_jg = y * mean_u * (prev_ratio - 1.0) - 1.0
    return rho_k, rho_khj, rho_jg


def _fisher_terms(pmf: OutputPmf) -> np.ndarray:
    y = np.arange(pmf.y_max)
    lp = pmf.log_probs
    ratio = (y + 1) * np.exp(lp[1:] - lp[:-1])
    rho = np.where(np.isfinite(lp[:-1]), ratio - y, 0.0)
    return pmf.probs[:-1] * rho ** 2


def fisher_info(pmf: OutputPmf) -> float:
    """J = sum_y P_Y(y) rho_po(y)^2 over the truncated support.

    Raises TruncationError unless the pmf tail is below 1e-10 and the last
    five summands are below 1e-14.
    """
    if pmf.tail_bound >= 1e-10:
        raise TruncationError(f"pmf tail {pmf.tail_bound:.3g} too heavy for Fisher information")
    terms = _fisher_terms(pmf)
    if terms.size < _FISHER_RUN or np.any(terms[-_FISHER_RUN:] >= _FISHER_TAIL):
        raise TruncationError("Fisher summands have not decayed below 1e-14; raise y_max")
    return math.fsum(terms)


def score_pmf(prior: Prior, params: ChannelParams, pmf: OutputPmf | None = None) -> OutputPmf:
    """A pmf long enough for the Fisher / MMSE sums: tail below 1e-15 and the
    last five Fisher summands below 1e-14."""
    if pmf is not None:
        return pmf
    pmf = output_pmf(prior, params, tail_tol=1e-15)
    while True:
        terms = _fisher_terms(pmf)
        if terms.size >= _FISHER_RUN and np.all(terms[-_FISHER_RUN:] < _FISHER_TAIL):
            return pmf
        pmf = output_pmf(prior, params, y_max=int(pmf.y_max * 1.5) + 10, tail_tol=1e-15)


def fisher_information(prior: Prior, params: ChannelParams) -> float:
    return fisher_info(score_pmf(prior, params))


def mmse_with_remainder(prior: Prior, params: ChannelParams,
                        pmf: OutputPmf | None = None) -> tuple[float, float]:
    """(sum_y P_Y(y) V(X | Y=y) over y <= y_max - 2, bound on the omitted terms).

    The omitted terms are bounded by E[X^2 1{Y > y_max - 2}] since
    V(X|Y=y) <= E[X^2|Y=y].
    """
    prior.second_moment()  # raises MomentError when E[X^2] is infinite
    pmf = score_pmf(prior, params, pmf)
    last = pmf.y_max - 2
    total = []
    for y in range(last + 1):
        if pmf.probs[y] == 0.0:
            continue
        total.append(pmf.probs[y] * posterior_variance(prior, params, y, pmf=pmf, of="X"))
    from scipy import special

    s = last + 1.0

    def logf(x):
        u = params.a * np.asarray(x, dtype=float) + params.lam
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(x) + np.log(special.gammainc(s, u))

    remainder = math.exp(prior.log_expect(logf, [(last - params.lam) / params.a]))
    return math.fsum(total), remainder


def mmse(prior: Prior, params: ChannelParams, pmf: OutputPmf | None = None) -> float:
    return mmse_with_remainder(prior, params, pmf)[0]


def brown_residual(prior: Prior, params: ChannelParams, pmf: OutputPmf | None = None) -> float:
    """|mmse - (a E[X] + lam - J) / a^2|."""
    pmf = score_pmf(prior, params, pmf)
    j = fisher_info(pmf)
    m = mmse(prior, params, pmf)
    rhs = (params.mean_intensity(prior) - j) / params.a ** 2
    return abs(m - rhs)
