"""Executable identity suite.

Every identity is evaluated on a battery of (prior, a, lambda) configurations
and summarised as one IdentityReport per (identity, configuration): the
worst residual over the probed y (and k) values, its tolerance and a verdict.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import analysis
from .channel import (
    ChannelParams,
    OutputPmf,
    log_likelihood,
    log_pmf_point,
    pmf_point,
    tail_bounds,
)
from .errors import DegenerateFitError, DivergenceError, DomainError, PoissonCMEError
from .estimator import (
    posterior_mean_direct,
    posterior_mean_tgr,
    posterior_moment,
    posterior_moment_direct,
    posterior_moment_product,
    posterior_variance,
)
from .io import rows_to_csv
from .priors import (
    Bernoulli,
    Degenerate,
    Discrete,
    Gamma,
    PoissonPrior,
    Prior,
    Uniform,
    exponential,
    prior_from_dict,
)
from .score import alt_scores, fisher_info, mmse, score, score_pmf

__all__ = [
    "IdentityReport",
    "BatteryConfig",
    "parse_battery",
    "default_battery",
    "run_config",
    "run_identities",
    "reports_to_csv",
    "IDENTITY_GROUPS",
]

CSV_HEADER = ("identity", "config", "residual", "tolerance", "pass")

LAMBDA_PATH = (0.0, 0.25, 1.0, 3.0, 10.0, 50.0, 200.0)
LIMIT_LAMBDAS = (10.0, 50.0, 200.0)
LIMIT_YS = (1, 2, 3)


@dataclass(frozen=True)
class IdentityReport:
    identity: str
    config: str
    residual: float
    tolerance: float
    passed: bool
    error: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def row(self):
        return (self.identity, self.config, float(self.residual), float(self.tolerance), self.passed)


@dataclass(frozen=True)
class BatteryConfig:
    name: str
    prior: Prior
    params: ChannelParams
    y_check: int = 10
    pmf_override: tuple[float, ...] | None = None
    expect: dict = field(default_factory=dict)
    limit_tol: float | None = None
    groups: frozenset[str] | None = None

    def wants(self, group: str) -> bool:
        if self.groups is None:
            return group in DEFAULT_GROUPS
        return group in self.groups


def _describe(prior: Prior, params: ChannelParams) -> str:
    body = json.dumps(prior.to_dict(), sort_keys=True, separators=(";", "="))
    body = body.replace('"', "").replace(",", ";")
    return f"{body}|a={params.a:g}|lambda={params.lam:g}"


def parse_battery(spec) -> list[BatteryConfig]:
    """Build configurations from ``{"configs": [...]}`` or a bare list.

    Each entry carries ``prior`` (a prior JSON object), ``a``, ``lambda`` and
    optionally ``name``, ``y_check``, ``pmf`` (a probability list replacing
    the computed output pmf), ``expect`` ({"mmse": .., "fisher": ..}),
    ``limit_tol`` and ``groups`` (identity groups to run).
    """
    entries = spec.get("configs") if isinstance(spec, dict) else spec
    if not isinstance(entries, list) or not entries:
        raise DomainError("identity battery is empty")
    out = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict) or "prior" not in e:
            raise DomainError(f"battery entry {i} needs a 'prior' field")
        prior = prior_from_dict(e["prior"])
        params = ChannelParams(float(e.get("a", 1.0)), float(e.get("lambda", 0.0)))
        groups = e.get("groups")
        if groups is not None:
            unknown = set(groups) - set(IDENTITY_GROUPS)
            if unknown:
                raise DomainError(f"unknown identity groups {sorted(unknown)}")
            groups = frozenset(groups)
        pmf = e.get("pmf")
        out.append(BatteryConfig(
            name=str(e.get("name") or _describe(prior, params)),
            prior=prior,
            params=params,
            y_check=int(e.get("y_check", 10)),
            pmf_override=None if pmf is None else tuple(float(p) for p in pmf),
            expect=dict(e.get("expect", {})),
            limit_tol=None if e.get("limit_tol") is None else float(e["limit_tol"]),
            groups=groups,
        ))
    return out


FIG2 = Discrete(((6.0, 0.3), (16.0, 0.7)))


def battery_priors() -> list[Prior]:
    return [Gamma(1.0, 1.0), Gamma(2.0, 3.0), exponential(3.0), Bernoulli(0.4),
            Uniform(0.5, 2.0), FIG2, Degenerate(2.0), PoissonPrior(2.0)]


def default_battery() -> list[BatteryConfig]:
    cfgs = []
    for prior in battery_priors():
        for lam in (0.25, 1.0, 3.0):
            params = ChannelParams(1.0, lam)
            tol = 1e-3 if (isinstance(prior, Gamma) and prior.rate == 3.0 and prior.shape == 1.0) else None
            cfgs.append(BatteryConfig(_describe(prior, params), prior, params, limit_tol=tol))
        for a in (0.5, 2.0):
            params = ChannelParams(a, 1.0)
            cfgs.append(BatteryConfig(_describe(prior, params), prior, params,
                                      groups=frozenset(DEFAULT_GROUPS - {"corollary31"})))
    g11 = ChannelParams(1.0, 0.0)
    cfgs.append(BatteryConfig(_describe(Gamma(1.0, 1.0), g11), Gamma(1.0, 1.0), g11,
                              expect={"mmse": 0.5, "fisher": 0.5},
                              groups=frozenset(DEFAULT_GROUPS - {"corollary31", "derivatives"})))
    for delta in (0.01, 0.05, 0.1):
        prior = analysis.contamination_prior(delta)
        params = ChannelParams(1.0, 0.0)
        cfgs.append(BatteryConfig(f"contaminated_gamma;delta={delta:g}|a=1|lambda=0", prior, params,
                                  groups=frozenset({"stability", "orthogonality"})))
    return cfgs


# -- helpers ----------------------------------------------------------------------------

class _Context:
    """Per-configuration cache of the output pmf."""

    def __init__(self, cfg: BatteryConfig):
        self.cfg = cfg
        self._pmf: OutputPmf | None = None

    @property
    def pmf(self) -> OutputPmf:
        if self._pmf is None:
            cfg = self.cfg
            if cfg.pmf_override is not None:
                self._pmf = OutputPmf.from_probs(cfg.pmf_override, cfg.params, tail_bound=1e-15)
            else:
                self._pmf = score_pmf(cfg.prior, cfg.params)
        return self._pmf


def _rel(value: float, reference: float) -> float:
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)


def _max(values: Iterable[float]) -> float:
    vals = list(values)
    return max(vals) if vals else 0.0


def _centered_variance(prior: Prior, params: ChannelParams, y: int, mean_u: float) -> float:
    """E[(U - E[U|y])^2 | Y=y] by direct integration (no cancellation)."""
    def logf(x):
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(np.abs(params.a * x + params.lam - mean_u)) + log_likelihood(y, x, params)

    return math.exp(prior.log_expect(logf, [(y - params.lam) / params.a]) - log_pmf_point(prior, params, y))


def _fd(f: Callable[[float], float], p: float) -> float:
    return analysis.finite_difference(f, p, lower=0.0)


# -- identity producers ----------------------------------------------------------------
# each returns a list of (identity name, residual, tolerance)

def _pmf_derivatives(ctx: _Context):
    prior, params = ctx.cfg.prior, ctx.cfg.params
    ys = range(0, ctx.cfg.y_check + 1, 2)
    r19, r20 = [], []
    for y in ys:
        d_lam = _fd(lambda v: pmf_point(prior, params.with_(lam=v), y), params.lam)
        d_a = _fd(lambda v: pmf_point(prior, params.with_(a=v), y), params.a)
        prev = pmf_point(prior, params, y - 1) if y > 0 else 0.0
        py, pnext = pmf_point(prior, params, y), pmf_point(prior, params, y + 1)
        r20.append(abs(d_lam - (prev - py)))
        r19.append(abs(params.a * d_a + params.lam * d_lam - (y * py - (y + 1) * pnext)))
    return [("pmf_gradient_combination", _max(r19), 1e-6), ("pmf_dark_current_derivative", _max(r20), 1e-6)]


def _moments(ctx: _Context):
    prior, params, pmf = ctx.cfg.prior, ctx.cfg.params, ctx.pmf
    ys = range(0, min(ctx.cfg.y_check, pmf.y_max - 5) + 1)
    tgr, higher, var, prod = [], [], [], []
    for y in ys:
        tgr.append(_rel(posterior_mean_tgr(pmf, y), posterior_mean_direct(prior, params, y)))
        m1 = posterior_moment_direct(prior, params, y, 1, "U")
        m2 = posterior_moment_direct(prior, params, y, 2, "U")
        # V(U|y) = m0 (m1' - m0) subtracts nearly equal conditional means when
        # the posterior is close to a point mass, so the residual is measured
        # against the operand scale E[U^2|y] rather than V itself
        v_ref = _centered_variance(prior, params, y, m1)
        var.append(abs(posterior_variance(prior, params, y, pmf=pmf) - v_ref) / m2)
        for k in range(1, 5):
            ref = m1 if k == 1 else (m2 if k == 2 else posterior_moment_direct(prior, params, y, k, "U"))
            higher.append(_rel(posterior_moment(prior, params, y, k, pmf=pmf), ref))
            prod.append(_rel(posterior_moment_product(prior, params, y, k, pmf=pmf), ref))
    return [("tgr_conditional_mean", _max(tgr), 1e-8), ("higher_moment_ratio", _max(higher), 1e-8),
            ("conditional_variance", _max(var), 1e-8), ("moment_product", _max(prod), 1e-8)]


def _scores(ctx: _Context):
    prior, params, pmf = ctx.cfg.prior, ctx.cfg.params, ctx.pmf
    mean_u = params.mean_intensity(prior)
    ys = range(0, min(ctx.cfg.y_check, pmf.y_max - 2) + 1)
    tweedie, decomp, dc, rel_k, rel_khj = [], [], [], [], []
    for y in ys:
        s = score(pmf, y)
        if y >= 1:
            tweedie.append(abs(y + s.rho_po - posterior_moment_direct(prior, params, y, 1, "U")))
        decomp.append(abs(params.a * s.rho_scale + params.lam * s.rho_dc + s.rho_po))
        dc.append(abs(s.rho_dc + s.rho_bwd) + abs(s.rho_po - s.rho_fwd))
        rk, rkhj, rjg = alt_scores(pmf, mean_u, y)
        rel_k.append(abs(s.rho_dc - rk) + (abs((rjg + 1) / (y * mean_u) - rk) if y else 0.0))
        rel_khj.append(abs(s.rho_po - (mean_u * rkhj + mean_u - y)))
    zero_mean = abs(math.fsum(pmf.probs[:-1] * np.array([score(pmf, y).rho_po for y in range(pmf.y_max)])))
    return [("tweedie", _max(tweedie), 1e-9), ("score_decomposition", _max(decomp), 1e-9),
            ("score_difference_forms", _max(dc), 1e-9), ("alt_score_dark_current", _max(rel_k), 1e-9),
            ("alt_score_khj", _max(rel_khj), 1e-9), ("score_zero_mean", zero_mean, 1e-9)]


def _brown(ctx: _Context):
    prior, params, pmf = ctx.cfg.prior, ctx.cfg.params, ctx.pmf
    j = fisher_info(pmf)
    m = mmse(prior, params, pmf)
    mean_u = params.mean_intensity(prior)
    out = [("brown_identity", abs(m - (mean_u - j) / params.a ** 2), 1e-6),
           ("mmse_bound", max(0.0, m - mean_u / params.a ** 2), 1e-12)]
    if "mmse" in ctx.cfg.expect:
        out.append(("mmse_expected", abs(m - float(ctx.cfg.expect["mmse"])), 1e-8))
    if "fisher" in ctx.cfg.expect:
        out.append(("fisher_expected", abs(j - float(ctx.cfg.expect["fisher"])), 1e-8))
    return out


def _derivatives(ctx: _Context):
    prior, params = ctx.cfg.prior, ctx.cfg.params
    if params.lam <= 0:
        return []
    ys = [y for y in (0, 1, 3, 6) if y <= ctx.cfg.y_check]
    r57, r58, r60, r62 = [], [], [], []
    for y in ys:
        if y > 0:
            r57.append(analysis.gradient_identity_residual(prior, params, y))
        fd = _fd(lambda v: posterior_mean_direct(prior, params.with_(lam=v), y), params.lam)
        r58.append(abs(fd - analysis.dmean_dlambda(prior, params, y)))
        for k in (1, 2, 3):
            a60, a62 = analysis.moment_gradient_residual(prior, params, y, k)
            r60.append(a60)
            r62.append(a62)
    return [("mean_gradient", _max(r57), 1e-5), ("mean_dark_current_derivative", _max(r58), 1e-5),
            ("moment_gradient", _max(r60), 1e-5), ("moment_dark_current_derivative", _max(r62), 1e-5)]


def _shape(ctx: _Context):
    """Monotonicity in y and the reverse-Jensen chain for k <= 5."""
    prior, params, pmf = ctx.cfg.prior, ctx.cfg.params, ctx.pmf
    top = min(25, pmf.y_max - 2)
    means = [posterior_mean_tgr(pmf, y) for y in range(top + 1)]
    mono = _max(max(0.0, means[y] - means[y + 1]) / max(1.0, abs(means[y])) for y in range(top))
    chain = []
    for y in range(0, min(ctx.cfg.y_check, pmf.y_max - 6) + 1):
        first = posterior_moment(prior, params, y, 1, pmf=pmf)
        for k in range(1, 6):
            mid = posterior_moment(prior, params, y, k, pmf=pmf) ** (1.0 / k)
            last = posterior_moment(prior, params, y + k - 1, 1, pmf=pmf)
            chain.append(max(0.0, first - mid, mid - last) / max(1.0, mid))
    return [("monotone_in_y", mono, 1e-10), ("reverse_jensen", _max(chain), 1e-10)]


def _corollary31(ctx: _Context):
    prior, params = ctx.cfg.prior, ctx.cfg.params
    if isinstance(prior, Degenerate):
        return []
    a = params.a
    worst_increase = -math.inf
    for y in LIMIT_YS:
        path = [posterior_mean_direct(prior, ChannelParams(a, lam), y) for lam in LAMBDA_PATH]
        worst_increase = max(worst_increase, max(b - c for c, b in zip(path, path[1:])))
    limit = analysis.lambda_limit(prior, a)
    gaps = [[posterior_mean_direct(prior, ChannelParams(a, lam), y) - limit for lam in LIMIT_LAMBDAS]
            for y in LIMIT_YS]
    # the gap must shrink along the lambda path and stay positive
    not_decreasing = _max(max(0.0, g[1] - g[0], g[2] - g[1], -g[2]) for g in gaps)
    out = [("lambda_monotone", worst_increase, 1e-10), ("lambda_limit_gap_decreasing", not_decreasing, 1e-12)]
    if ctx.cfg.limit_tol is not None:
        out.append(("lambda_limit_final_gap", _max(g[-1] for g in gaps), ctx.cfg.limit_tol))
    return out


def _tails(ctx: _Context):
    prior, params, pmf = ctx.cfg.prior, ctx.cfg.params, ctx.pmf
    try:
        prior.log_moment(params.a, params.lam)
    except DivergenceError:
        return []
    worst = 0.0
    for y in range(1, 41):
        lo, hi = tail_bounds(prior, params, y)
        p = pmf.prob(y) if y <= pmf.y_max else pmf_point(prior, params, y)
        worst = max(worst, (lo - p) / max(p, 1e-300), (p - hi) / hi)
    return [("pmf_tail_sandwich", max(worst, 0.0), 1e-10)]


def _growth(ctx: _Context):
    prior, params, pmf = ctx.cfg.prior, ctx.cfg.params, ctx.pmf
    top = min(60, pmf.y_max - 1)
    ratios, agree = [], []
    for y in range(top + 1):
        g = analysis.growth_ratio(prior, params, y, pmf=pmf)
        ratios.append(g.ratio)
        if g.laplace_estimate is not None and y <= 25:
            agree.append(_rel(g.laplace_estimate, g.ratio))
    out = [("growth_lower_envelope", min(ratios[top // 2:]), 1.0)]
    if agree:
        out.append(("growth_laplace_ratio", _max(agree), 1e-8))
    try:
        prior.log_moment(params.a, params.lam)
    except DivergenceError:
        return out
    excess = []
    for y in range(0, 41, 4):
        lhs, rhs = analysis.explicit_growth_bound(prior, params, y)
        excess.append(max(0.0, lhs - rhs))
    out.append(("explicit_growth_bound", _max(excess), 1e-12))
    return out


def _orthogonality(ctx: _Context):
    prior, params = ctx.cfg.prior, ctx.cfg.params
    res = [analysis.orthogonality_residual(prior, params, c1, c2, t, pmf=ctx.pmf)
           for c1, c2 in ((0.3, 0.7), (0.5, 0.5)) for t in (0.1, 0.5, 1.0, 3.0)]
    return [("orthogonality", _max(res), 1e-9)]


def _stability(ctx: _Context):
    prior, params = ctx.cfg.prior, ctx.cfg.params
    try:
        rep = analysis.linearity_report(prior, params)
    except DegenerateFitError:
        return []
    return [("char_gap_bound", max(0.0, rep.char_gap - rep.levy_bound_rhs), 1e-9),
            ("levy_bound", max(0.0, rep.levy_distance ** 2 / 2 - rep.levy_bound_rhs), 1e-9)]


IDENTITY_GROUPS: dict[str, Callable[[_Context], list]] = {
    "pmf_derivatives": _pmf_derivatives,
    "moments": _moments,
    "scores": _scores,
    "brown": _brown,
    "derivatives": _derivatives,
    "shape": _shape,
    "corollary31": _corollary31,
    "tails": _tails,
    "growth": _growth,
    "orthogonality": _orthogonality,
    "stability": _stability,
}
DEFAULT_GROUPS = frozenset(IDENTITY_GROUPS) - {"stability"}


def _passes(name: str, residual: float, tol: float) -> bool:
    if not math.isfinite(residual):
        return False
    return residual < tol if name in ("growth_lower_envelope", "lambda_monotone") else residual <= tol


def run_config(cfg: BatteryConfig) -> list[IdentityReport]:
    ctx = _Context(cfg)
    reports = []
    for group, producer in IDENTITY_GROUPS.items():
        if not cfg.wants(group):
            continue
        try:
            results = producer(ctx)
        except PoissonCMEError as exc:
            reports.append(IdentityReport(group, cfg.name, math.nan, 0.0, False,
                                          f"{type(exc).__name__}: {exc}"))
            continue
        for name, residual, tol in results:
            reports.append(IdentityReport(name, cfg.name, float(residual), float(tol),
                                          _passes(name, float(residual), tol)))
    return reports


def run_identities(configs: Sequence[BatteryConfig], jobs: int = 1) -> list[IdentityReport]:
    """Run every configuration; output order follows the battery order."""
    if not configs:
        raise DomainError("identity battery is empty")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(run_config, configs))
    else:
        chunks = [run_config(c) for c in configs]
    return [r for chunk in chunks for r in chunk]


def reports_to_csv(reports: Sequence[IdentityReport]) -> str:
    return rows_to_csv(CSV_HEADER, (r.row() for r in reports))
