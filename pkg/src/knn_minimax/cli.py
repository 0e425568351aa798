"""Command-line front end.

Subcommands: ``simulate``, ``rates``, ``check`` and ``solve``.  Values come
from flags, then from ``--config file.json``, then from built-in defaults.
Config errors exit with status 2 before anything is written; runtime
failures exit with status 1.  Output files are written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from .analysis import assumptions as chk
from .analysis.balance import RateQuery, TailSpec, solve_balance
from .errors import ConfigError, KnnMinimaxError
from .models import TABLE2_MODELS, ClassConditional, LocationModel, model_from_json
from .rules import parse_schedule

DEFAULTS = {
    "simulate": {"table2": False, "model": None, "n": "100,500,1000", "n_test": 200, "schedule": "standard",
                 "reps": 1000, "seed": 0, "density": "kde", "backend": "brute", "out": None, "format": "csv",
                 "threads": None},
    "rates": {"g": "0.5,1,2,4", "n": "100,316,1000,3162,10000", "reps": 200, "seed": 0, "b": 0.2,
              "n_test": 1000, "out": None, "format": "csv", "threads": None},
    "check": {"assumption": None, "model": None, "eps": 0.01, "t": 0.1, "delta": 0.01, "a": 1.0,
              "probes": None, "n_mc": 1_000_000, "seed": 0, "out": None},
    "solve": {"psi": "id", "C": 1.0, "alpha": 1.0, "d": 1, "n": None, "side": "upper"},
}

# single densities accepted by ``check --model``; "laplace" is one Laplace(1)
# component, whose tail P(mu(X) < eps) is exactly 2 eps
NAMED_MODELS = {
    "laplace": lambda: ClassConditional(LocationModel("laplace", {"lam": 1.0}, 1.0), 1),
    "gauss": lambda: LocationModel("gauss", {"sigma": 1.0}, 1.0),
    "cauchy": lambda: LocationModel("cauchy", {"gamma": 1.0}, 0.5),
    "powerlaw": lambda: LocationModel("powerlaw", {"g": 1.0}, 0.5),
    **{name: (lambda m=m: m) for name, m in TABLE2_MODELS.items()},
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="knn-minimax", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, name, *flags):
        sp.add_argument("--config", help="JSON file of option values (keys as in the long flags, '_' for '-')")
        for f in flags:
            f(sp, DEFAULTS[name])

    def out(sp, d, formats=("csv", "json", "svg")):
        sp.add_argument("--out", help="output path (default: stdout)")
        if formats:
            sp.add_argument("--format", choices=formats, help=f"output format (default {d['format']})")

    def threads(sp, d):
        sp.add_argument("--threads", type=int, help="worker threads (default: $KNN_MINIMAX_THREADS or 1)")

    s = sub.add_parser("simulate", help="Monte Carlo excess risk of k-NN rules")
    common(s, "simulate", out, threads)
    s.add_argument("--table2", action="store_const", const=True,
                   help="standard vs sliced rule on the five comparison models (15 rows)")
    s.add_argument("--model", help="model JSON descriptor or name (%s)" % ", ".join(NAMED_MODELS))
    s.add_argument("--n", help="comma-separated training sizes (default 100,500,1000)")
    s.add_argument("--n-test", type=int, help="test-set size (default 200)")
    s.add_argument("--schedule", help="comma-separated schedules: standard, general[:a], compact, "
                                      "sliced[:a], sliced-theory[:a], fixed:K (default standard)")
    s.add_argument("--reps", type=int, help="replications (default 1000)")
    s.add_argument("--seed", type=int, help="master seed (default 0)")
    s.add_argument("--density", choices=("kde", "analytic"), help="density for sliced rules (default kde)")
    s.add_argument("--backend", choices=("brute", "tree"), help="neighbor index (default brute)")

    r = sub.add_parser("rates", help="log-log excess-risk slopes on power-law models")
    common(r, "rates", out, threads)
    r.add_argument("--g", help="comma-separated power-law exponents (default 0.5,1,2,4)")
    r.add_argument("--n", help="comma-separated increasing sizes, at least four (default 100,316,1000,3162,10000)")
    r.add_argument("--reps", type=int, help="replications per point (default 200)")
    r.add_argument("--seed", type=int, help="master seed (default 0)")
    r.add_argument("--b", type=float, help="location parameter (default 0.2)")
    r.add_argument("--n-test", type=int, help="test-set size (default 1000)")

    c = sub.add_parser("check", help="Monte Carlo / quadrature check of one assumption, as JSON")
    common(c, "check", lambda sp, d: out(sp, d, formats=()))
    c.add_argument("--assumption", choices=("tail", "margin", "mass", "gradient"), help="assumption to check")
    c.add_argument("--model", help="model JSON descriptor or name (%s)" % ", ".join(NAMED_MODELS))
    c.add_argument("--eps", type=float, help="tail level (default 0.01)")
    c.add_argument("--t", type=float, help="margin level (default 0.1)")
    c.add_argument("--delta", type=float, help="ball radius for the mass check (default 0.01)")
    c.add_argument("--a", type=float, help="exponent of the gradient criterion (default 1)")
    c.add_argument("--probes", help="comma-separated probe points (mass: default quantile grid)")
    c.add_argument("--n-mc", type=int, help="Monte Carlo sample size (default 1000000)")
    c.add_argument("--seed", type=int, help="seed (default 0)")

    v = sub.add_parser("solve", help="solve a balance equation for the rate scale")
    common(v, "solve")
    v.add_argument("--psi", help="tail function: id, power:G or powerlog:G,R (default id)")
    v.add_argument("--C", type=float, help="tail constant (default 1)")
    v.add_argument("--alpha", type=float, help="margin exponent (default 1)")
    v.add_argument("--d", type=int, help="dimension (default 1)")
    v.add_argument("--n", type=float, help="sample size")
    v.add_argument("--side", choices=("lower", "upper"), help="balance equation (default upper)")
    return p


def _resolve(args) -> argparse.Namespace:
    """Merge flags over config-file values over defaults."""
    cmd = args.command
    defaults = DEFAULTS[cmd]
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
    merged = {**defaults, **cfg, **given}
    if isinstance(merged.get("model"), dict):
        merged["model"] = json.dumps(merged["model"])
    return argparse.Namespace(command=cmd, **merged)


def _int_list(text) -> list[int]:
    return [int(float(v)) for v in _float_list(text)]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated number list: {text!r}") from None
    if not vals:
        raise ConfigError("empty number list")
    return vals


def _model(text):
    if text is None:
        raise ConfigError("--model is required")
    text = str(text).strip()
    if text in NAMED_MODELS:
        return NAMED_MODELS[text]()
    if not text.startswith("{"):
        raise ConfigError(f"unknown model name {text!r}")
    return model_from_json(text)


def _threads(value) -> int:
    if value is None:
        env = os.environ.get("KNN_MINIMAX_THREADS")
        try:
            value = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"KNN_MINIMAX_THREADS must be an integer, got {env!r}") from None
    if int(value) < 1:
        raise ConfigError("--threads must be >= 1")
    return int(value)


def _emit(text: str, out) -> None:
    if out:
        harness.write_text(out, text)
    else:
        sys.stdout.write(text)


def _positive(name, value):
    if value is None or not value > 0:
        raise ConfigError(f"--{name.replace('_', '-')} must be positive")


# subcommands --------------------------------------------------------------

def cmd_simulate(a) -> int:
    threads = _threads(a.threads)
    n_list = _int_list(a.n)
    _positive("reps", a.reps)
    _positive("n_test", a.n_test)
    if any(n < 1 for n in n_list):
        raise ConfigError("--n values must be >= 1")
    if a.table2:
        if a.model is not None:
            raise ConfigError("--table2 fixes the models; drop --model")
        rows, _ = harness.run_table2(a.seed, a.reps, n_list, a.n_test, threads, a.density)
        if a.format == "csv":
            text = harness.table2_csv(rows)
        elif a.format == "json":
            text = harness.to_json([vars(r) for r in rows])
        else:
            series = {}
            for r in rows:
                series.setdefault(f"{r.model} std", ([], []))
                series.setdefault(f"{r.model} sliced", ([], []))
                series[f"{r.model} std"][0].append(r.n)
                series[f"{r.model} std"][1].append(r.standard)
                series[f"{r.model} sliced"][0].append(r.n)
                series[f"{r.model} sliced"][1].append(r.sliced)
            text = harness.loglog_svg(series, "standard vs sliced")
        _emit(text, a.out)
        return 0
    model = _model(a.model)
    try:
        schedules = tuple(parse_schedule(s) for s in str(a.schedule).split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    configs = [harness.ExperimentConfig(model, n, a.n_test, a.reps, schedules, a.seed, a.density, a.backend, threads)
               for n in n_list]
    results = [harness.run_excess_risk(cfg) for cfg in configs]
    if a.format == "csv":
        text = harness.results_csv(results)
    elif a.format == "json":
        text = harness.to_json([r.to_dict() for r in results])
    else:
        series = {s.name: ([r.n_train for r in results], [max(r.stats(s.name).mean_excess, 1e-300) for r in results])
                  for s in schedules}
        text = harness.loglog_svg(series, results[0].model)
    _emit(text, a.out)
    return 0


def cmd_rates(a) -> int:
    threads = _threads(a.threads)
    g_list, n_grid = _float_list(a.g), _int_list(a.n)
    _positive("reps", a.reps)
    _positive("b", a.b)
    if len(n_grid) < 4 or any(y <= x for x, y in zip(n_grid, n_grid[1:])):
        raise ConfigError("--n must be increasing with at least four values")
    if any(g <= 0 for g in g_list):
        raise ConfigError("--g values must be positive")
    rows = harness.run_rates(g_list, n_grid, a.seed, a.reps, a.b, a.n_test, threads)
    if a.format == "csv":
        flat = [{"g": r.g, "slope": r.slope, "intercept": r.intercept, "r2": r.r2} for r in rows]
        text = harness.rows_to_csv(flat, ["g", "slope", "intercept", "r2"])
    elif a.format == "json":
        text = harness.to_json([vars(r) for r in rows])
    else:
        text = harness.loglog_svg({f"g={r.g:g}": (r.n_grid, r.excess) for r in rows}, "excess risk vs n")
    _emit(text, a.out)
    return 0


def cmd_check(a) -> int:
    if a.assumption is None:
        raise ConfigError("--assumption is required")
    model = _model(a.model)
    probes = None if a.probes is None else np.array(_float_list(a.probes))
    if a.assumption == "tail":
        _positive("eps", a.eps)
        rep = chk.tail_report(model, a.eps, a.n_mc, a.seed)
    elif a.assumption == "margin":
        _positive("t", a.t)
        if not hasattr(model, "eta_at"):
            raise ConfigError("margin check needs a labelled model")
        rep = chk.margin_report(model, a.t, a.n_mc, a.seed)
    elif a.assumption == "mass":
        _positive("delta", a.delta)
        rep = chk.mass_report(model, a.delta, probes=probes)
    else:
        _positive("a", a.a)
        if probes is None:
            raise ConfigError("gradient check needs --probes in the low-density region")
        if not hasattr(model, "gradient_log_density"):
            raise ConfigError("gradient check needs a location model")
        rep = chk.gradient_report(model, a.a, probes)
    d = rep.to_dict()
    d["parameters"]["model"] = getattr(model, "label", type(model).__name__)
    _emit(harness.to_json(d), a.out)
    return 0


def _tail(text: str, C: float) -> TailSpec:
    name, _, arg = str(text).lower().partition(":")
    try:
        if name in ("id", "identity"):
            return TailSpec("identity", C=C)
        if name == "power":
            return TailSpec.power(float(arg), C)
        if name == "powerlog":
            g, r = arg.split(",")
            return TailSpec.powerlog(float(g), float(r), C)
    except ValueError:
        pass
    raise ConfigError(f"bad --psi {text!r}; use id, power:G or powerlog:G,R")


def cmd_solve(a) -> int:
    if a.n is None:
        raise ConfigError("--n is required")
    res = solve_balance(_tail(a.psi, a.C), RateQuery(a.alpha, a.d, a.n, a.side))
    sym = "nu" if a.side == "upper" else "eps"
    print(f"{sym}={res['scale']:.10g} rate={res['rate']:.10g} k={res['k']}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "rates": cmd_rates, "check": cmd_check, "solve": cmd_solve}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        resolved = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](resolved)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KnnMinimaxError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
