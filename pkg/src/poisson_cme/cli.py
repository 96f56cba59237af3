"""Command-line front end.

Usage examples:
  poisson-cme pmf --prior '{"family": "discrete", "atoms": [[6, 0.3], [16, 0.7]]}' --a 1
  poisson-cme estimate --prior '{"family": "exponential", "rate": 3}' --lambda 2 --route all --ymax 20
  poisson-cme identities --output identities.csv
  poisson-cme ebayes --samples counts.csv --a 1 --lambda 0
  poisson-cme sweep --prior '{"family": "exponential", "rate": 3}' --param lambda --grid 0,1,2,5

Exit codes: 0 success, 1 identity failure, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import identities
from .channel import ChannelParams, PmfRoute, auto_y_max, output_pmf, sample_channel
from .errors import DomainError, PoissonCMEError
from .estimator import EmpiricalCounts, Route, empirical_bayes_mean, estimator_curve
from .io import read_json_arg, rows_to_csv, write_text
from .priors import Prior, prior_from_dict

EXIT_OK = 0
EXIT_IDENTITY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

ESTIMATE_ROUTES = ("direct", "tgr", "laplace", "closed_form", "product")
DEFAULT_ESTIMATE_YMAX = 25


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    prior: Prior | None
    params: ChannelParams
    y_max: int | None  # None means automatic
    seed: int
    output: str | None
    format: str
    jobs: int


def _common(p: argparse.ArgumentParser, prior_required: bool = True) -> None:
    p.add_argument("--prior", required=prior_required, help="prior as inline JSON or a JSON file path")
    p.add_argument("--a", type=float, default=1.0, help="scaling factor a > 0 (default 1)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="dark current >= 0 (default 0)")
    p.add_argument("--ymax", default="auto", help="largest y to report, or 'auto'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for batteries and sweeps")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poisson-cme",
                                 description="Conditional-mean estimation for the Poisson noise channel.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pmf", help="output pmf P_Y")
    _common(p)
    p.add_argument("--route", choices=[r.value for r in PmfRoute], default="mixture")

    p = sub.add_parser("estimate", help="conditional-mean curve E[X^k | Y=y]")
    _common(p)
    p.add_argument("--route", choices=ESTIMATE_ROUTES + ("all",), default="direct")
    p.add_argument("--k", type=int, default=1, help="moment order (default 1)")

    p = sub.add_parser("identities", help="run the identity verification suite")
    _common(p, prior_required=False)
    p.add_argument("--battery", default=None, help="battery JSON (inline or file); default built-in")

    p = sub.add_parser("ebayes", help="empirical-Bayes (Robbins) estimate from counts")
    _common(p, prior_required=False)
    p.add_argument("--samples", default=None, help="CSV of 'y,count' rows or one column of raw y")
    p.add_argument("--simulate", type=int, default=None,
                   help="draw this many channel outputs from --prior instead of reading --samples")

    p = sub.add_parser("sweep", help="estimator curves over a grid of a or lambda")
    _common(p)
    p.add_argument("--param", choices=("a", "lambda"), required=True)
    p.add_argument("--grid", nargs="+", required=True,
                   help="grid values, space- or comma-separated (e.g. 0,1,2,5)")
    p.add_argument("--route", choices=ESTIMATE_ROUTES, default="direct")
    return ap


def _config(args) -> RunConfig:
    try:
        prior = prior_from_dict(read_json_arg(args.prior)) if args.prior else None
        params = ChannelParams(args.a, args.lam)
    except (OSError, ValueError, KeyError, TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.ymax == "auto":
        y_max = None
    else:
        try:
            y_max = int(args.ymax)
        except ValueError as exc:
            raise ConfigError(f"--ymax must be an integer or 'auto', got {args.ymax!r}") from exc
        if y_max < 0:
            raise ConfigError("--ymax must be nonnegative")
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return RunConfig(prior, params, y_max, args.seed, args.output, args.format, args.jobs)


def _emit(cfg: RunConfig, csv_text: str, json_obj) -> None:
    text = csv_text if cfg.format == "csv" else json.dumps(json_obj, indent=2, sort_keys=True) + "\n"
    write_text(text, cfg.output)


# -- subcommands ---------------------------------------------------------------------------

def cmd_pmf(cfg: RunConfig, route: str) -> int:
    y_max = "auto" if cfg.y_max is None else cfg.y_max
    pmf = output_pmf(cfg.prior, cfg.params, route=route, y_max=y_max)
    _emit(cfg, pmf.to_csv(), pmf.to_dict())
    return EXIT_OK


def _estimate_ymax(cfg: RunConfig, k: int) -> int:
    if cfg.y_max is not None:
        return cfg.y_max
    return max(0, min(DEFAULT_ESTIMATE_YMAX, auto_y_max(cfg.prior, cfg.params) - k))


def _route_values(cfg: RunConfig, route: str, y_max: int, k: int) -> list[float]:
    return list(estimator_curve(cfg.prior, cfg.params, route, y_max, k=k).values)


def cmd_estimate(cfg: RunConfig, k: int, route: str) -> int:
    y_max = _estimate_ymax(cfg, k)
    if route != "all":
        curve = estimator_curve(cfg.prior, cfg.params, route, y_max, k=k)
        _emit(cfg, curve.to_csv(), curve.to_dict())
        return EXIT_OK
    columns: dict[str, list[float]] = {}
    skipped = {}
    for r in ESTIMATE_ROUTES:
        try:
            columns[r] = _route_values(cfg, r, y_max, k)
        except PoissonCMEError as exc:
            skipped[r] = f"{type(exc).__name__}: {exc}"
            columns[r] = [math.nan] * (y_max + 1)
            print(f"route {r} unavailable: {skipped[r]}", file=sys.stderr)
    if len(skipped) == len(ESTIMATE_ROUTES):
        raise PoissonCMEError("no route could evaluate the estimator")
    deviation = []
    for y in range(y_max + 1):
        vals = [columns[r][y] for r in ESTIMATE_ROUTES if math.isfinite(columns[r][y])]
        ref = max(abs(v) for v in vals)
        deviation.append((max(vals) - min(vals)) / ref if ref > 0 else 0.0)
    rows = [[y] + [columns[r][y] for r in ESTIMATE_ROUTES] + [deviation[y]] for y in range(y_max + 1)]
    csv_text = rows_to_csv(["y", *ESTIMATE_ROUTES, "max_deviation"], rows)
    obj = {"k": k, "params": cfg.params.to_dict(),
           "routes": {r: [None if math.isnan(v) else v for v in columns[r]] for r in ESTIMATE_ROUTES},
           "max_deviation": deviation, "skipped": skipped}
    _emit(cfg, csv_text, obj)
    return EXIT_OK


def cmd_identities(cfg: RunConfig, battery: str | None) -> int:
    if battery is None:
        configs = identities.default_battery()
    else:
        try:
            configs = identities.parse_battery(read_json_arg(battery))
        except (OSError, ValueError, KeyError, TypeError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
    reports = identities.run_identities(configs, jobs=cfg.jobs)
    _emit(cfg, identities.reports_to_csv(reports),
          [json.loads(r.to_json()) for r in reports])
    failed = [r for r in reports if not r.passed]
    for r in failed:
        detail = r.error or f"residual {r.residual:.3e} > tolerance {r.tolerance:.1e}"
        print(f"FAIL {r.identity} [{r.config}]: {detail}", file=sys.stderr)
    return EXIT_IDENTITY if failed else EXIT_OK


def cmd_ebayes(cfg: RunConfig, samples: str | None, simulate: int | None) -> int:
    if simulate is not None:
        if cfg.prior is None:
            raise ConfigError("--simulate needs --prior")
        if simulate < 1:
            raise ConfigError("--simulate must be positive")
        rng = np.random.default_rng(cfg.seed)
        _, ys = sample_channel(cfg.prior, cfg.params, rng, simulate)
        counts = EmpiricalCounts.from_samples(ys)
    elif samples is not None:
        try:
            counts = EmpiricalCounts.from_csv(samples)
        except (OSError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("ebayes needs --samples or --simulate")
    rows = []
    for y, n in counts.counts.items():
        if cfg.y_max is not None and y > cfg.y_max:
            continue
        est = empirical_bayes_mean(counts, cfg.params, y)
        rows.append((y, n, est, est < 0))
    csv_text = rows_to_csv(["y", "count", "estimate", "negative_warning"], rows)
    obj = {"params": cfg.params.to_dict(), "n_total": counts.n_total,
           "rows": [{"y": y, "count": n, "estimate": e, "negative_warning": w} for y, n, e, w in rows]}
    _emit(cfg, csv_text, obj)
    if any(w for *_, w in rows):
        print("warning: some empirical estimates are negative (reported unclamped)", file=sys.stderr)
    return EXIT_OK


def _sweep_point(args: tuple) -> list[float]:
    prior_json, a, lam, route, y_max = args
    prior = prior_from_dict(json.loads(prior_json))
    return list(estimator_curve(prior, ChannelParams(a, lam), route, y_max).values)


def parse_grid(tokens: list[str]) -> list[float]:
    try:
        vals = [float(t) for tok in tokens for t in tok.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --grid value: {exc}") from exc
    if not vals:
        raise ConfigError("--grid is empty")
    return vals


def cmd_sweep(cfg: RunConfig, param: str, grid: list[float], route: str) -> int:
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("--grid must be strictly increasing")
    points = []
    for v in grid:
        try:
            params = cfg.params.with_(a=v) if param == "a" else cfg.params.with_(lam=v)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        points.append(params)
    y_max = cfg.y_max if cfg.y_max is not None else DEFAULT_ESTIMATE_YMAX
    tasks = [(cfg.prior.to_json(), p.a, p.lam, route, y_max) for p in points]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            curves = list(pool.map(_sweep_point, tasks))
    else:
        curves = [_sweep_point(t) for t in tasks]
    rows = [(v, y, est) for v, curve in zip(grid, curves) for y, est in enumerate(curve)]
    csv_text = rows_to_csv(["param_value", "y", "estimate"], rows)
    obj = {"param": param, "route": route, "params": cfg.params.to_dict(),
           "rows": [{"param_value": v, "y": y, "estimate": e} for v, y, e in rows]}
    _emit(cfg, csv_text, obj)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "pmf":
            return cmd_pmf(cfg, args.route)
        if args.command == "estimate":
            if args.k < 1:
                raise ConfigError("--k must be a positive integer")
            return cmd_estimate(cfg, args.k, args.route)
        if args.command == "identities":
            return cmd_identities(cfg, args.battery)
        if args.command == "ebayes":
            return cmd_ebayes(cfg, args.samples, args.simulate)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.param, parse_grid(args.grid), args.route)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PoissonCMEError as exc:
        route = getattr(args, "route", None)
        where = f" (route {route})" if route else ""
        print(f"numeric failure{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    ap.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
