import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from poisson_cme.analysis import lambda_limit
from poisson_cme.channel import ChannelParams, output_pmf
from poisson_cme.cli import main
from poisson_cme.priors import Gamma

FIG2 = '{"family": "discrete", "atoms": [[6, 0.3], [16, 0.7]]}'
EXP3 = '{"family": "exponential", "rate": 3}'
G11 = '{"family": "gamma", "rate": 1, "shape": 1}'


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]


def test_pmf_fig2(capsys):
    code, out, _ = run(capsys, "pmf", "--prior", FIG2, "--ymax", "5")
    assert code == 0
    r = rows(out)
    assert r[0] == ["y", "prob"]
    assert float(r[1][1]) == pytest.approx(7.43704427622211e-4, rel=1e-13)


def test_pmf_gamma_rows_and_routes(capsys):
    for route in ["mixture", "laplace", "closed_form"]:
        code, out, _ = run(capsys, "pmf", "--prior", G11, "--ymax", "10", "--route", route)
        assert code == 0
        vals = [float(v) for _, v in rows(out)[1:]]
        assert np.allclose(vals, 2.0 ** -(np.arange(11) + 1.0), rtol=1e-12)


def test_pmf_degenerate_is_poisson(capsys):
    code, out, _ = run(capsys, "pmf", "--prior", '{"family": "degenerate", "value": 2}', "--ymax", "6")
    vals = [float(v) for _, v in rows(out)[1:]]

    assert np.allclose(vals, stats.poisson.pmf(np.arange(7), 2.0), rtol=1e-13)


def test_pmf_json(capsys):
    code, out, _ = run(capsys, "pmf", "--prior", G11, "--ymax", "3", "--format", "json", "--lambda", "0.5")
    obj = json.loads(out)
    assert obj["params"] == {"a": 1.0, "lambda": 0.5}
    assert len(obj["probs"]) == 4 and obj["tail_bound"] > 0


def test_estimate_fig6(capsys):
    code, out, _ = run(capsys, "estimate", "--prior", EXP3, "--lambda", "2", "--ymax", "9")
    assert code == 0
    vals = {int(y): float(v) for y, v in rows(out)[1:]}
    assert vals[5] == pytest.approx(0.458016606244889, rel=1e-9)
    assert vals[9] == pytest.approx(0.846281655353462, rel=1e-9)


def test_estimate_degenerate_constant(capsys):
    code, out, _ = run(capsys, "estimate", "--prior", '{"family": "degenerate", "value": 2.5}',
                       "--a", "2", "--lambda", "1", "--ymax", "15")
    assert all(float(v) == pytest.approx(2.5, rel=1e-12) for _, v in rows(out)[1:])


def test_estimate_all_routes(capsys):
    code, out, _ = run(capsys, "estimate", "--prior", '{"family": "gamma", "rate": 3, "shape": 2}',
                       "--route", "all", "--ymax", "20")
    r = rows(out)
    assert r[0] == ["y", "direct", "tgr", "laplace", "closed_form", "product", "max_deviation"]
    assert max(float(x[-1]) for x in r[1:]) < 1e-7


def test_estimate_all_marks_unsupported_routes(capsys):
    code, out, err = run(capsys, "estimate", "--prior", FIG2, "--route", "all", "--ymax", "4")
    assert code == 0
    r = rows(out)
    assert all(x[4] == "nan" for x in r[1:])
    assert "closed_form" in err


def test_estimate_moment_order(capsys):
    code, out, _ = run(capsys, "estimate", "--prior", G11, "--k", "2", "--ymax", "3")
    vals = [float(v) for _, v in rows(out)[1:]]
    # E[X^2 | Y=y] = (y+1)(y+2)/4 for Gamma(1,1), a=1, lam=0
    assert vals == pytest.approx([(y + 1) * (y + 2) / 4 for y in range(4)], rel=1e-12)


def test_numeric_failure_exit_3_names_route(capsys):
    code, out, err = run(capsys, "estimate", "--prior", FIG2, "--route", "closed_form", "--ymax", "4")
    assert code == 3
    assert "closed_form" in err and out == ""


@pytest.mark.parametrize("argv", [
    ["pmf", "--prior", '{"family": "nope"}'],
    ["pmf", "--prior", G11, "--a", "-1"],
    ["pmf", "--prior", G11, "--lambda", "-1"],
    ["pmf", "--prior", "/nonexistent/prior.json"],
    ["pmf", "--prior", "{not json"],
    ["pmf", "--prior", G11, "--ymax", "many"],
    ["estimate", "--prior", G11, "--k", "0"],
    ["sweep", "--prior", EXP3, "--param", "lambda", "--grid", "0,2,1"],
    ["sweep", "--prior", EXP3, "--param", "a", "--grid", "0,1"],
    ["ebayes"],
    ["identities", "--battery", "[]"],
    ["identities", "--battery", '{"configs": []}'],
])
def test_config_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert "config error" in err


def test_ebayes_counts(capsys, tmp_path):
    f = tmp_path / "counts.csv"
    f.write_text("y,count\n0,500\n1,250\n")
    code, out, _ = run(capsys, "ebayes", "--samples", str(f))
    r = rows(out)
    assert r[0] == ["y", "count", "estimate", "negative_warning"]
    assert r[1][:3] == ["0", "500", "5.00000000000000e-01"]
    assert r[1][3] == "false"


def test_ebayes_negative_flag(capsys, tmp_path):
    f = tmp_path / "counts.csv"
    f.write_text("y,count\n0,50\n1,10\n2,5\n")
    code, out, err = run(capsys, "ebayes", "--samples", str(f), "--lambda", "3")
    assert code == 0
    r = rows(out)
    assert float(r[1][2]) == pytest.approx(10 / 50 - 3)
    assert r[1][3] == "true"
    assert "negative" in err


def test_ebayes_malformed(capsys, tmp_path):
    f = tmp_path / "counts.csv"
    f.write_text("y,count\n0,-4\n")
    assert run(capsys, "ebayes", "--samples", str(f))[0] == 2


def test_ebayes_simulation_deterministic(capsys, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"eb{i}.csv"
        code, out, _ = run(capsys, "ebayes", "--prior", G11, "--simulate", "20000", "--seed", "5",
                           "--output", str(path))
        assert code == 0 and out == ""
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    code, out, _ = run(capsys, "ebayes", "--prior", G11, "--simulate", "20000", "--seed", "6")
    assert out.encode() != outs[0]


def test_sweep_fig6_curves(capsys):
    code, out, _ = run(capsys, "sweep", "--prior", EXP3, "--param", "lambda", "--grid", "0,1,2,5", "--ymax", "9")
    assert code == 0
    r = rows(out)
    assert r[0] == ["param_value", "y", "estimate"]
    assert len(r) == 1 + 4 * 10
    vals = {(float(p), int(y)): float(e) for p, y, e in r[1:]}
    for y in range(10):
        assert vals[0.0, y] == pytest.approx((y + 1) / 4, rel=1e-10)
        assert vals[1.0, y] >= vals[2.0, y] >= vals[5.0, y]
    assert vals[2.0, 5] == pytest.approx(0.458016606244889, rel=1e-9)


def test_sweep_large_lambda_approaches_limit(capsys):
    code, out, _ = run(capsys, "sweep", "--prior", EXP3, "--param", "lambda", "--grid", "10", "50", "200",
                       "--ymax", "4")
    vals = {(float(p), int(y)): float(e) for p, y, e in rows(out)[1:]}
    lim = lambda_limit(Gamma(rate=3.0, shape=1.0), 1.0)
    for y in range(1, 5):
        gaps = [vals[lam, y] - lim for lam in (10.0, 50.0, 200.0)]
        assert gaps[0] > gaps[1] > gaps[2] > 0


def test_sweep_degenerate_constant(capsys):
    code, out, _ = run(capsys, "sweep", "--prior", '{"family": "degenerate", "value": 1.5}',
                       "--param", "lambda", "--grid", "0,1,3", "--ymax", "5")
    assert all(float(e) == pytest.approx(1.5, rel=1e-12) for _, _, e in rows(out)[1:])


def test_sweep_parallel_deterministic(capsys, tmp_path):
    texts = []
    for jobs in ["1", "2"]:
        path = tmp_path / f"s{jobs}.csv"
        code, out, _ = run(capsys, "sweep", "--prior", FIG2, "--param", "a", "--grid", "0.5,1,2",
                           "--lambda", "1", "--ymax", "6", "--jobs", jobs, "--output", str(path))
        assert code == 0 and out == ""
        texts.append(path.read_bytes())
    assert texts[0] == texts[1]


def test_identities_custom_battery_and_negative_control(capsys, tmp_path):
    battery = tmp_path / "b.json"
    battery.write_text(json.dumps({"configs": [{"prior": json.loads(G11), "a": 1, "lambda": 1,
                                                "groups": ["scores", "moments"]}]}))
    out_path = tmp_path / "r.csv"
    code, out, _ = run(capsys, "identities", "--battery", str(battery), "--output", str(out_path))
    assert code == 0 and out == ""
    assert out_path.read_text().startswith("identity,config,residual,tolerance,pass")

    probs = output_pmf(Gamma(1.0, 1.0), ChannelParams(1.0, 0.0), tail_tol=1e-15).probs.copy()
    probs[3] *= 1.05
    bad = json.dumps([{"prior": json.loads(G11), "a": 1, "lambda": 0, "pmf": probs.tolist(),
                       "groups": ["moments"]}])
    code, out, err = run(capsys, "identities", "--battery", bad)
    assert code == 1
    assert "FAIL" in err


def test_module_entry_point(tmp_path):
    out = tmp_path / "p.csv"
    proc = subprocess.run([sys.executable, "-m", "poisson_cme", "pmf", "--prior", G11, "--ymax", "2",
                           "--output", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
    assert out.read_text().splitlines()[1] == "0,5.00000000000000e-01"
    proc = subprocess.run([sys.executable, "-m", "poisson_cme", "pmf", "--prior", "{bad"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
