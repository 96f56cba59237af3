import math

import mpmath
import numpy as np
import pytest

from poisson_cme.channel import ChannelParams, output_pmf, sample_channel
from poisson_cme.errors import (
    DegenerateEvidenceError,
    DomainError,
    NoObservationsError,
    TruncationError,
    UnsupportedRouteError,
)
from poisson_cme.estimator import (
    EmpiricalCounts,
    closed_form_mean,
    empirical_bayes_mean,
    estimator_curve,
    posterior_mean_direct,
    posterior_mean_laplace,
    posterior_mean_tgr,
    posterior_moment,
    posterior_moment_direct,
    posterior_moment_product,
    posterior_variance,
)
from poisson_cme.priors import Bernoulli, Degenerate, Gamma, InverseGamma, PoissonPrior, Uniform, exponential

from conftest import BATTERY

FIG2 = BATTERY["fig2"]
P0 = ChannelParams(1.0, 0.0)


def _discrete_posterior(points, a, lam, y, k, of="X"):
    """Exact posterior moment of a finite discrete prior in 50-digit arithmetic."""
    with mpmath.workdps(50):
        num = den = mpmath.mpf(0)
        for x, w in points:
            u = mpmath.mpf(a) * x + lam
            lik = w * mpmath.exp(-u) * u ** y / mpmath.factorial(y)
            v = x if of == "X" else u
            num += lik * mpmath.mpf(v) ** k
            den += lik
        return float(num / den)


def test_fig2_paper_values():
    assert posterior_mean_direct(FIG2, P0, 0) == pytest.approx(6.00105921948798, rel=1e-12)
    assert posterior_mean_direct(FIG2, P0, 9) == pytest.approx(10.1939953018791, rel=1e-12)
    assert posterior_mean_direct(FIG2, ChannelParams(1.0, 3.0), 10) == pytest.approx(7.57021578567893, rel=1e-12)


def test_fig6_paper_values():
    e3 = exponential(3.0)
    pmf = output_pmf(e3, P0, y_max=20)
    assert posterior_mean_tgr(pmf, 1) == pytest.approx(0.5, rel=1e-13)
    pmf2 = output_pmf(e3, ChannelParams(1.0, 2.0), y_max=20)
    assert posterior_mean_tgr(pmf2, 5) == pytest.approx(0.458016606244889, rel=1e-12)


def test_degenerate_constant():
    c = Degenerate(2.5)
    for params in [P0, ChannelParams(2.0, 1.0)]:
        pmf = output_pmf(c, params, y_max=30)
        for y in range(20):
            assert posterior_mean_direct(c, params, y) == pytest.approx(2.5, rel=1e-13)
            assert posterior_mean_tgr(pmf, y) == pytest.approx(2.5, rel=1e-12)


@pytest.mark.parametrize("a, lam", [(1.0, 0.0), (0.5, 1.0), (2.0, 3.0)])
def test_direct_route_exact_discrete(a, lam):
    params = ChannelParams(a, lam)
    for y in [0, 1, 5, 13, 30, 60]:
        for k in [1, 2, 3]:
            ref = _discrete_posterior(FIG2.points, a, lam, y, k)
            assert posterior_moment_direct(FIG2, params, y, k) == pytest.approx(ref, rel=1e-12)


def test_direct_route_gamma_closed_form():
    g = Gamma(rate=3.0, shape=2.0)
    for a in [0.5, 1.0, 2.0]:
        for y in [0, 3, 25, 200]:
            assert posterior_mean_direct(g, ChannelParams(a, 0.0), y) == pytest.approx((y + 2.0) / (3.0 + a), rel=1e-12)


def test_direct_route_large_lambda_binomial_oracle():
    # E[X|Y=y] for Gamma(1,1), lam > 0, as an exact ratio of finite binomial sums
    g = Gamma(1.0, 1.0)
    a, lam, y = 1.0, 200.0, 25
    with mpmath.workdps(60):
        def s(n, extra):
            # E[X^extra (aX+lam)^n e^{-aX}] for X ~ Exp(1)
            return sum(mpmath.binomial(n, j) * a ** j * lam ** (n - j) * mpmath.factorial(j + extra)
                       / mpmath.mpf(1 + a) ** (j + extra + 1) for j in range(n + 1))
        ref = float(s(y, 1) / s(y, 0))
    assert posterior_mean_direct(g, ChannelParams(a, lam), y) == pytest.approx(ref, rel=1e-12)


def test_posterior_moment_examples():
    g = Gamma(1.0, 1.0)
    pmf = output_pmf(g, P0, y_max=60)
    for y in range(10):
        for k in range(1, 5):
            expected = math.factorial(y + k) / (2 ** k * math.factorial(y))
            assert posterior_moment(g, P0, y, k, pmf=pmf) == pytest.approx(expected, rel=1e-12)
            assert posterior_moment(g, P0, y, k) == pytest.approx(expected, rel=1e-12)
    assert posterior_moment(g, P0, 4, 1, pmf=pmf) == pytest.approx(posterior_mean_tgr(pmf, 4) * 1.0 + 0.0)
    pmf2 = output_pmf(FIG2, P0, y_max=40)
    assert posterior_moment(FIG2, P0, 0, 2, pmf=pmf2) == pytest.approx(
        _discrete_posterior(FIG2.points, 1.0, 0.0, 0, 2, of="U"), rel=1e-12)


def test_product_identity():
    g = Gamma(1.0, 1.0)
    assert posterior_moment_product(g, P0, 0, 3) == pytest.approx(0.75, rel=1e-13)
    assert posterior_moment_product(g, P0, 6, 1) == pytest.approx(posterior_moment(g, P0, 6, 1), rel=1e-13)
    pmf = output_pmf(FIG2, P0, y_max=40)
    assert posterior_moment_product(FIG2, P0, 2, 2, pmf) == pytest.approx(
        posterior_moment(FIG2, P0, 2, 2, pmf), rel=1e-8)


def test_truncation_guards():
    pmf = output_pmf(Gamma(1.0, 1.0), P0, y_max=5)
    with pytest.raises(TruncationError):
        posterior_mean_tgr(pmf, 5)
    with pytest.raises(TruncationError):
        posterior_moment(Gamma(1.0, 1.0), P0, 3, 3, pmf=pmf)


def test_posterior_variance():
    assert posterior_variance(Degenerate(3.0), P0, 4) == pytest.approx(0.0, abs=1e-12)
    g = Gamma(rate=1.5, shape=2.5)
    for y in range(8):
        assert posterior_variance(g, ChannelParams(0.5, 0.0), y, of="X") == pytest.approx(
            (2.5 + y) / (2.0 ** 2), rel=1e-11)
    assert posterior_variance(Gamma(1.0, 1.0), P0, 0, of="X") == pytest.approx(0.25, rel=1e-12)
    exact = (_discrete_posterior(FIG2.points, 1.0, 0.0, 9, 2) - _discrete_posterior(FIG2.points, 1.0, 0.0, 9, 1) ** 2)
    assert posterior_variance(FIG2, P0, 9, of="X") == pytest.approx(exact, rel=1e-9)


def test_laplace_route_table_rows():
    g = Gamma(rate=2.0, shape=3.0)
    for y in range(20):
        assert posterior_mean_laplace(g, ChannelParams(1.5, 0.0), y) == pytest.approx((y + 3.0) / 3.5, rel=1e-12)
    b = Bernoulli(0.3)
    pe = 0.3 * math.exp(-1.0)
    assert posterior_mean_laplace(b, P0, 0) == pytest.approx(pe / (0.7 + pe), rel=1e-13)
    for y in range(1, 10):
        assert posterior_mean_laplace(b, P0, y) == pytest.approx(1.0, rel=1e-13)


def test_laplace_route_dark_current():
    for prior in [FIG2, Gamma(rate=3.0, shape=2.0), PoissonPrior(2.0)]:
        params = ChannelParams(2.0, 3.0)
        for y in [0, 4, 17]:
            assert posterior_mean_laplace(prior, params, y) == pytest.approx(
                posterior_mean_direct(prior, params, y), rel=1e-10)


def test_closed_form_rows():
    # uniform row against high-precision quadrature
    u = Uniform(0.5, 2.0)
    for y in [0, 3, 12]:
        num = mpmath.quad(lambda x: x ** (y + 1) * mpmath.exp(-x), [0.5, 2.0])
        den = mpmath.quad(lambda x: x ** y * mpmath.exp(-x), [0.5, 2.0])
        assert closed_form_mean(u, P0, y) == pytest.approx(float(num / den), rel=1e-12)
    # inverse gamma Bessel row against the direct route
    ig = InverseGamma(shape=3.0, scale=2.0)
    for a in [0.5, 1.0, 2.0]:
        for y in [0, 1, 4, 10]:
            assert closed_form_mean(ig, ChannelParams(a, 0.0), y) == pytest.approx(
                posterior_mean_direct(ig, ChannelParams(a, 0.0), y), rel=1e-9)
    # Poisson prior row against exact summation
    p = PoissonPrior(2.0)
    for y in [0, 2, 7]:
        with mpmath.workdps(40):
            w = lambda k: mpmath.mpf(2) ** k / mpmath.factorial(k) * mpmath.exp(-k) * mpmath.mpf(k) ** y
            num = mpmath.nsum(lambda k: k * w(k), [0, mpmath.inf])
            den = mpmath.nsum(w, [0, mpmath.inf]) if y > 0 else mpmath.nsum(lambda k: mpmath.mpf(2) ** k / mpmath.factorial(k) * mpmath.exp(-k), [0, mpmath.inf])
            ref = float(num / den)
        assert closed_form_mean(p, P0, y) == pytest.approx(ref, rel=1e-12)


def test_closed_form_exponential_dark_current():
    e3 = exponential(3.0)
    for lam in [0.5, 2.0, 5.0]:
        for y in [0, 5, 9]:
            assert closed_form_mean(e3, ChannelParams(1.0, lam), y) == pytest.approx(
                posterior_mean_direct(e3, ChannelParams(1.0, lam), y), rel=1e-10)
    assert closed_form_mean(e3, ChannelParams(1.0, 2.0), 9) == pytest.approx(0.846281655353462, rel=1e-9)


def test_closed_form_unsupported():
    with pytest.raises(UnsupportedRouteError):
        closed_form_mean(FIG2, P0, 0)
    with pytest.raises(UnsupportedRouteError):
        closed_form_mean(Gamma(rate=2.0, shape=2.0), ChannelParams(1.0, 1.0), 0)


@pytest.mark.parametrize("name", sorted(BATTERY))
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("lam", [0.0, 1.0, 3.0])
def test_cross_route_agreement(name, a, lam):
    prior = BATTERY[name]
    params = ChannelParams(a, lam)
    curves = [estimator_curve(prior, params, "direct", 25).values]
    for route in ["tgr", "laplace", "closed_form", "product"]:
        try:
            curves.append(estimator_curve(prior, params, route, 25).values)
        except UnsupportedRouteError:
            pass
    ref = np.array(curves[0])
    for c in curves[1:]:
        assert np.allclose(c, ref, rtol=1e-7, atol=0)


@pytest.mark.parametrize("name", sorted(BATTERY))
def test_monotone_and_clamped(name):
    prior = BATTERY[name]
    lo, hi = prior.support()
    for params in [P0, ChannelParams(2.0, 3.0)]:
        vals = estimator_curve(prior, params, "direct", 40).values
        assert all(v2 >= v1 - 1e-12 for v1, v2 in zip(vals, vals[1:]))
        if name in ("fig2", "uniform", "bernoulli", "degenerate"):
            assert all(lo - 1e-12 <= v <= hi + 1e-12 for v in vals)


@pytest.mark.parametrize("name", sorted(BATTERY))
def test_reverse_jensen(name):
    prior = BATTERY[name]
    for y in range(21):
        m1 = posterior_mean_direct(prior, P0, y)
        for k in range(2, 6):
            root = posterior_moment_direct(prior, P0, y, k) ** (1.0 / k)
            upper = posterior_mean_direct(prior, P0, y + k - 1)
            assert m1 <= root * (1 + 1e-12) + 1e-14
            assert root <= upper + 1e-10


def test_uniqueness_probe():
    curves = {n: np.array(estimator_curve(p, P0, "direct", 40).values) for n, p in BATTERY.items()}
    names = sorted(curves)
    for i, n1 in enumerate(names):
        for n2 in names[i + 1:]:
            assert np.max(np.abs(curves[n1] - curves[n2])) > 1e-9


def test_degenerate_evidence():
    with pytest.raises(DegenerateEvidenceError):
        posterior_mean_direct(Bernoulli(0.0), P0, 3)


def test_curve_serialization_and_guards():
    curve = estimator_curve(Gamma(1.0, 1.0), P0, "direct", 2)
    assert curve.to_csv().splitlines() == ["y,value", "0,5.00000000000000e-01",
                                           "1,1.00000000000000e+00", "2,1.50000000000000e+00"]
    assert curve.to_dict()["route"] == "direct"
    with pytest.raises(DomainError):
        estimator_curve(Gamma(1.0, 1.0), P0, "direct", 2, k=0)
    with pytest.raises(UnsupportedRouteError):
        estimator_curve(Gamma(1.0, 1.0), P0, "tgr", 2, k=2)
    with pytest.raises(ValueError):
        estimator_curve(Gamma(1.0, 1.0), P0, "nope", 2)


def test_empirical_formula():
    counts = EmpiricalCounts({0: 500, 1: 250})
    assert counts.n_total == 750
    assert empirical_bayes_mean(counts, P0, 0) == pytest.approx(0.5)
    assert empirical_bayes_mean(counts, ChannelParams(2.0, 1.0), 0) == pytest.approx((0.5 - 1.0) / 2.0)
    with pytest.raises(NoObservationsError):
        empirical_bayes_mean(counts, P0, 5)
    assert empirical_bayes_mean(counts, P0, 0, add_one=True) == pytest.approx(251 / 501)


def test_empirical_counts_validation(tmp_path):
    with pytest.raises(DomainError):
        EmpiricalCounts({})
    with pytest.raises(DomainError):
        EmpiricalCounts({0: 3}, n_total=5)
    with pytest.raises(DomainError):
        EmpiricalCounts.from_samples([0, 1.5])
    f = tmp_path / "c.csv"
    f.write_text("y,count\n0,500\n1,250\n")
    assert EmpiricalCounts.from_csv(f).counts == {0: 500, 1: 250}
    raw = tmp_path / "raw.csv"
    raw.write_text("y\n0\n0\n2\n")
    assert EmpiricalCounts.from_csv(raw).counts == {0: 2, 2: 1}
    bad = tmp_path / "bad.csv"
    bad.write_text("y,count\n0,x\n")
    with pytest.raises(DomainError):
        EmpiricalCounts.from_csv(bad)


def test_empirical_degenerate_consistency():
    _, y = sample_channel(Degenerate(3.0), P0, np.random.default_rng(4), 10 ** 6)
    counts = EmpiricalCounts.from_samples(y)
    assert empirical_bayes_mean(counts, P0, 3) == pytest.approx(3.0, abs=0.05)
