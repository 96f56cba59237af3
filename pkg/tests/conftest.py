import pytest

from poisson_cme.identities import FIG2
from poisson_cme.priors import (
    Bernoulli,
    Degenerate,
    Gamma,
    InverseGamma,
    PoissonPrior,
    Uniform,
    exponential,
)

# The eight-prior battery used throughout the cross-route checks.
BATTERY = {
    "gamma11": Gamma(rate=1.0, shape=1.0),
    "gamma23": Gamma(rate=3.0, shape=2.0),
    "exp3": exponential(3.0),
    "bernoulli": Bernoulli(0.4),
    "uniform": Uniform(0.5, 2.0),
    "fig2": FIG2,
    "degenerate": Degenerate(2.0),
    "poisson": PoissonPrior(2.0),
}


@pytest.fixture(params=sorted(BATTERY))
def battery_prior(request):
    return BATTERY[request.param]


@pytest.fixture
def fig2():
    return FIG2


@pytest.fixture
def inverse_gamma():
    return InverseGamma(shape=3.0, scale=2.0)


# -- acceptance summary ----------------------------------------------------------------
# Tests marked ``@pytest.mark.criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary, whatever the verbosity.

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = ""
        if rep.outcome == "failed":
            detail = str(rep.longrepr).strip().splitlines()[-1][:160]
        _CRITERIA[number] = (title, rep.outcome.upper(), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        status = "PASS" if status == "PASSED" else "FAIL" if status == "FAILED" else status
        line = f"criterion {number}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
