"""Monte Carlo excess-risk experiments.

Replication ``r`` draws its training set from ``derive_stream(seed, 2r)`` and
its test set from ``derive_stream(seed, 2r + 1)``; every schedule of a config
is scored on the same pair, so schedule differences are paired.  Results are
folded in replication order, so the worker count never changes the output.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .analysis.bounds import excess_risk_identity
from .analysis.rates import fit_rate
from .core import derive_stream
from .errors import ConfigError, DimMismatch, QuadratureFailure
from .models import TABLE2_MODELS, LocationModel
from .models.kde import kde_fit
from .neighbors import build_index
from .rules import DensitySource, KSchedule, aggregate_sda, predict

CSV_FIELDS = ["model", "n", "schedule", "mean_excess", "se", "mean_risk", "bayes_risk", "reps", "seed"]
TABLE2_FIELDS = ["model", "n", "standard", "standard_se", "sliced", "sliced_se",
                 "improvement", "paired_se", "reps", "seed"]


@dataclass
class ExperimentConfig:
    model: object
    n_train: int
    n_test: int = 200
    replications: int = 1000
    schedules: Sequence[KSchedule] = (KSchedule.standard(),)
    seed: int = 0
    density_source: str = "kde"
    backend: str = "brute"
    threads: int = 1

    def __post_init__(self):
        if self.n_train < 1:
            raise ConfigError("n_train must be >= 1")
        if self.n_test < 1:
            raise ConfigError("n_test must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.density_source not in ("kde", "analytic"):
            raise ConfigError("density_source must be 'kde' or 'analytic'")
        if self.backend not in ("brute", "tree"):
            raise ConfigError("backend must be 'brute' or 'tree'")
        if not self.schedules:
            raise ConfigError("at least one schedule is required")
        names = [s.name for s in self.schedules]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate schedules: {names}")
        self.schedules = tuple(self.schedules)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


@dataclass
class ScheduleStats:
    schedule: str
    mean_excess: float
    std_error: float
    mean_risk: float
    bayes_risk: float
    replications: int
    # excess against the Bayes rule's risk on the same test sets
    mean_excess_empirical: float
    se_empirical: float
    # excess through E[|2 eta - 1| 1{disagree with Bayes}]
    mean_excess_identity: float
    se_identity: float


@dataclass
class ExperimentResult:
    model: str
    n_train: int
    n_test: int
    seed: int
    bayes_risk: float
    risks: dict
    identity: dict
    bayes_test_risks: np.ndarray
    stream_ids: list = field(default_factory=list)

    @property
    def schedules(self) -> list[str]:
        return list(self.risks)

    @property
    def replications(self) -> int:
        return len(self.bayes_test_risks)

    def excess(self, schedule: str) -> np.ndarray:
        return self.risks[schedule] - self.bayes_risk

    def stats(self, schedule: str) -> ScheduleStats:
        risk = self.risks[schedule]
        mean_risk, se = _mean_se(risk)
        emp, emp_se = _mean_se(risk - self.bayes_test_risks)
        ident, ident_se = _mean_se(self.identity[schedule])
        return ScheduleStats(schedule, mean_risk - self.bayes_risk, se, mean_risk, self.bayes_risk,
                             self.replications, emp, emp_se, ident, ident_se)

    def paired_difference(self, a: str, b: str) -> tuple[float, float]:
        """Mean and SE of the per-replication risk difference a - b."""
        return _mean_se(self.risks[a] - self.risks[b])

    def csv_rows(self) -> list[dict]:
        rows = []
        for name in self.schedules:
            s = self.stats(name)
            rows.append({"model": self.model, "n": self.n_train, "schedule": name,
                         "mean_excess": s.mean_excess, "se": s.std_error, "mean_risk": s.mean_risk,
                         "bayes_risk": s.bayes_risk, "reps": s.replications, "seed": self.seed})
        return rows

    def to_dict(self) -> dict:
        return {"model": self.model, "n_train": self.n_train, "n_test": self.n_test, "seed": self.seed,
                "replications": self.replications, "bayes_risk": self.bayes_risk,
                "schedules": {name: asdict(self.stats(name)) for name in self.schedules},
                "stream_ids": self.stream_ids}


def _model_label(model) -> str:
    return getattr(model, "label", type(model).__name__)


def _features(data):
    return data.X[:, 0] if data.dim == 1 else data.X


def _run_pool(fn, count: int, threads: int) -> list:
    if threads <= 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _replicate(cfg: ExperimentConfig, r: int):
    model = cfg.model
    train = model.sample(cfg.n_train, derive_stream(cfg.seed, 2 * r))
    test = model.sample(cfg.n_test, derive_stream(cfg.seed, 2 * r + 1))
    index = build_index(train, cfg.backend)
    density = None
    if any(s.is_sliced for s in cfg.schedules):
        if cfg.density_source == "analytic":
            density = DensitySource.analytic(model)
        else:
            density = DensitySource.estimated(kde_fit(train.X))
    xt = _features(test)
    eta = np.asarray(model.eta_at(xt), dtype=np.float64)
    bayes = np.asarray(model.bayes_classify(xt))
    risks, ident = [], []
    for s in cfg.schedules:
        pred = predict(index, test.X, s, density)
        risks.append(float(np.mean(pred != test.y)))
        ident.append(excess_risk_identity(eta, pred, bayes))
    return risks, ident, float(np.mean(bayes != test.y))


def run_excess_risk(cfg: ExperimentConfig) -> ExperimentResult:
    out = _run_pool(lambda r: _replicate(cfg, r), cfg.replications, cfg.threads)
    names = [s.name for s in cfg.schedules]
    risks = np.array([o[0] for o in out]).reshape(cfg.replications, len(names))
    ident = np.array([o[1] for o in out]).reshape(cfg.replications, len(names))
    return ExperimentResult(
        model=_model_label(cfg.model), n_train=cfg.n_train, n_test=cfg.n_test, seed=cfg.seed,
        bayes_risk=float(cfg.model.bayes_risk),
        risks={n: risks[:, i].copy() for i, n in enumerate(names)},
        identity={n: ident[:, i].copy() for i, n in enumerate(names)},
        bayes_test_risks=np.array([o[2] for o in out]),
        stream_ids=[(2 * r, 2 * r + 1) for r in range(cfg.replications)],
    )


# comparison table ------------------------------------------------------------

@dataclass
class Table2Row:
    model: str
    n: int
    standard: float
    standard_se: float
    sliced: float
    sliced_se: float
    improvement: float
    paired_se: float
    reps: int
    seed: int


def table2_row(name: str, result: ExperimentResult, standard: str = "standard", sliced: str = "sliced") -> Table2Row:
    a, b = result.stats(standard), result.stats(sliced)
    _, paired = result.paired_difference(standard, sliced)
    imp = (a.mean_excess - b.mean_excess) / a.mean_excess * 100.0 if a.mean_excess > 0 else float("nan")
    return Table2Row(name, result.n_train, a.mean_excess, a.std_error, b.mean_excess, b.std_error,
                     imp, paired, result.replications, result.seed)


def run_table2(seed: int = 0, replications: int = 1000, n_list=(100, 500, 1000), n_test: int = 200,
               threads: int = 1, density_source: str = "kde", models=None):
    """Standard vs sliced rule on the five comparison models.

    Returns ``(rows, results)`` where ``results[(model, n)]`` keeps the
    per-replication data for further checks.
    """
    models = TABLE2_MODELS if models is None else models
    schedules = (KSchedule.standard(1.0), KSchedule.sliced(1.0, empirical=True))
    rows, results = [], {}
    for name, model in models.items():
        for n in n_list:
            cfg = ExperimentConfig(model, n, n_test, replications, schedules, seed, density_source, threads=threads)
            res = run_excess_risk(cfg)
            results[(name, n)] = res
            rows.append(table2_row(name, res))
    return rows, results


# rates ---------------------------------------------------------------------

@dataclass
class RateRow:
    g: float
    slope: float
    intercept: float
    r2: float
    n_grid: list
    excess: list
    se: list


def run_rates(g_list, n_grid, seed: int = 0, replications: int = 200, b: float = 0.2,
              n_test: int = 1000, threads: int = 1) -> list[RateRow]:
    """Log-log slope of the standard rule's excess risk on power-law models.

    The excess is measured through the identity estimator, which is
    nonnegative replication by replication; ``b`` defaults to 0.2, where the
    slopes separate within n <= 10^4.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 4 or any(b2 <= a2 for a2, b2 in zip(n_grid, n_grid[1:])):
        raise ConfigError("n_grid must be increasing with at least four points")
    if any(g <= 0 for g in g_list):
        raise ConfigError("g values must be positive")
    sched = KSchedule.standard(1.0)
    rows = []
    for g in g_list:
        model = LocationModel("powerlaw", {"g": float(g)}, b)
        means, ses = [], []
        for n in n_grid:
            res = run_excess_risk(ExperimentConfig(model, n, n_test, replications, (sched,), seed, threads=threads))
            m, s = _mean_se(res.identity[sched.name])
            means.append(m)
            ses.append(s)
        fit = fit_rate(zip(n_grid, means))
        rows.append(RateRow(float(g), fit["slope"], fit["intercept"], fit["r2"], n_grid, means, ses))
    return rows


# two-sample (SDA) setting ------------------------------------------------------

def sda_bayes_risk(model0, model1) -> float:
    """(1/2) * integral of min(f0, f1) for 1-d densities."""
    breaks = sorted(set(model0.quadrature_breaks()) | set(model1.quadrature_breaks()))

    def integrand(x):
        return 0.5 * min(float(model0.density_at(x)), float(model1.density_at(x)))

    edges = [-np.inf] + breaks + [np.inf]
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=500)
        total += val
        err += e
    if err > 1e-7:
        raise QuadratureFailure(f"SDA Bayes risk quadrature error {err:.2e}")
    return total


def _sda_test(model0, model1, n_test: int, gen):
    n0 = n_test // 2
    x = np.concatenate([model0.sample_features(n0, gen), model1.sample_features(n_test - n0, gen)])
    y = np.concatenate([np.zeros(n0, np.int64), np.ones(n_test - n0, np.int64)])
    return x, y


def run_sda(model0, model1, n: int, k: int, n_test: int = 200, replications: int = 1000, seed: int = 0,
            threads: int = 1) -> ExperimentResult:
    """k-NN on two fixed-size samples, each of size n, pooled with labels 0/1.

    Test points come half from each density; the Bayes rule is
    ``1{f1 >= f0}`` and its risk ``(1/2) * integral of min(f0, f1)``.
    """
    if getattr(model0, "dim", 1) != getattr(model1, "dim", 1):
        raise DimMismatch("SDA densities must share the dimension")
    r_star = sda_bayes_risk(model0, model1)
    sched = KSchedule.fixed(k)

    def one(r):
        gen = derive_stream(seed, 2 * r).generator()
        s0 = model0.sample_features(n, gen)
        s1 = model1.sample_features(n, gen)
        pooled = aggregate_sda(s0.reshape(-1, 1), s1.reshape(-1, 1))
        x, y = _sda_test(model0, model1, n_test, derive_stream(seed, 2 * r + 1).generator())
        pred = predict(build_index(pooled), x.reshape(-1, 1), KSchedule.fixed(min(k, pooled.n)))
        f0, f1 = np.asarray(model0.density_at(x)), np.asarray(model1.density_at(x))
        tot = f0 + f1
        eta = np.divide(f1, tot, out=np.full_like(tot, 0.5), where=tot > 0)
        bayes = (f1 >= f0).astype(np.int64)
        return float(np.mean(pred != y)), excess_risk_identity(eta, pred, bayes), float(np.mean(bayes != y))

    out = _run_pool(one, replications, threads)
    return ExperimentResult(
        model=f"sda({_model_label(model0)}|{_model_label(model1)})", n_train=n, n_test=n_test, seed=seed,
        bayes_risk=r_star, risks={sched.name: np.array([o[0] for o in out])},
        identity={sched.name: np.array([o[1] for o in out])},
        bayes_test_risks=np.array([o[2] for o in out]),
        stream_ids=[(2 * r, 2 * r + 1) for r in range(replications)],
    )


def _nearest_mean(x0: float, pts: np.ndarray, labels: np.ndarray, k: int) -> float:
    m = min(k, pts.size)
    if m == 0:
        return 0.0
    d = np.abs(pts - x0)
    # stable sort keeps the (distance, position) order used everywhere else
    idx = np.argsort(d, kind="stable")[:m]
    return float(labels[idx].mean())


def sda_eta_samples(model0, model1, x: float, n: int, k: int, replications: int, seed: int = 0) -> np.ndarray:
    """Draws of the pooled estimate at ``x`` with fixed sample sizes n and n."""
    out = np.empty(replications)
    lab = np.concatenate([np.zeros(n), np.ones(n)])
    for r in range(replications):
        gen = derive_stream(seed, r).generator()
        pts = np.concatenate([model0.sample_features(n, gen), model1.sample_features(n, gen)])
        out[r] = _nearest_mean(x, pts, lab, k)
    return out


def poissonization_check(model0, model1, x: float, n: int, k: int, replications: int = 10_000,
                         seed: int = 0) -> dict:
    """Compare two constructions of the k-NN estimate at ``x``.

    (i) Poisson(n) points from each density, pooled with labels 0/1 and
    shuffled; (ii) Poisson(2n) i.i.d. pairs with U from the even mixture and
    V | U ~ Bernoulli(eta(U)), eta = f1/(f0+f1).  Both average the first
    ``min(k, size)`` neighbor labels.  The two laws coincide, so the
    two-sample KS distance should be small.
    """
    a = np.empty(replications)
    b = np.empty(replications)
    for r in range(replications):
        g1 = derive_stream(seed, 2 * r).generator()
        n1, n2 = g1.poisson(n), g1.poisson(n)
        pts = np.concatenate([model0.sample_features(n1, g1), model1.sample_features(n2, g1)])
        lab = np.concatenate([np.zeros(n1), np.ones(n2)])
        perm = g1.permutation(pts.size)
        a[r] = _nearest_mean(x, pts[perm], lab[perm], k)

        g2 = derive_stream(seed, 2 * r + 1).generator()
        m = g2.poisson(2 * n)
        comp = g2.random(m) < 0.5
        u = np.empty(m)
        u[~comp] = model0.sample_features(int((~comp).sum()), g2)
        u[comp] = model1.sample_features(int(comp.sum()), g2)
        f0, f1 = np.asarray(model0.density_at(u)), np.asarray(model1.density_at(u))
        tot = f0 + f1
        eta = np.divide(f1, tot, out=np.full_like(tot, 0.5), where=tot > 0)
        v = (g2.random(m) < eta).astype(np.float64)
        b[r] = _nearest_mean(x, u, v, k)
    ks = stats.ks_2samp(a, b)
    return {"ks_distance": float(ks.statistic), "p_value": float(ks.pvalue),
            "poissonized": a, "iid": b}


def eta_hat_samples(model, x, n: int, ks, replications: int, seed: int = 0) -> np.ndarray:
    """Draws of the k-NN estimate at each point of ``x`` for each k in ``ks``.

    One training sample per replication serves every (x, k) pair; the
    result has shape ``(replications, len(x), len(ks))`` (``x`` axis dropped
    for a scalar ``x``).
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ks = np.asarray(ks, dtype=np.int64).reshape(-1)
    Q = np.repeat(xs, ks.size).reshape(-1, 1)
    kk = np.tile(ks, xs.size)
    out = np.empty((replications, xs.size, ks.size))
    for r in range(replications):
        data = model.sample(n, derive_stream(seed, r))
        out[r] = build_index(data).label_means(Q, kk).reshape(xs.size, ks.size)
    return out[:, 0, :] if np.ndim(x) == 0 else out


# output ---------------------------------------------------------------------

def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def rows_to_csv(rows: list[dict], fields: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row[k]) for k in fields})
    return buf.getvalue()


def results_csv(results: list[ExperimentResult]) -> str:
    return rows_to_csv([row for res in results for row in res.csv_rows()], CSV_FIELDS)


def table2_csv(rows: list[Table2Row]) -> str:
    return rows_to_csv([asdict(r) for r in rows], TABLE2_FIELDS)


def write_text(path, text: str) -> None:
    _atomic_write(path, text)


def to_json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.integer, np.floating)):
            return o.item()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def loglog_svg(series: dict, title: str = "", xlabel: str = "n", ylabel: str = "excess risk",
               width: int = 480, height: int = 360) -> str:
    """Minimal log-log line plot; ``series`` maps a label to ``(xs, ys)``."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing positive to plot")
    lx = [math.log10(p[0]) for p in pts]
    ly = [math.log10(p[1]) for p in pts]
    x0, x1 = min(lx), max(lx) if max(lx) > min(lx) else min(lx) + 1
    y0, y1 = min(ly), max(ly) if max(ly) > min(ly) else min(ly) + 1
    ml, mr, mt, mb = 60, 110, 30, 45
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (math.log10(v) - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (math.log10(v) - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{title}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{xlabel} (log scale)</text>',
           f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {mt + ph / 2:.1f})">{ylabel} (log scale)</text>']
    for e in range(math.ceil(x0), math.floor(x1) + 1):
        x = ml + (e - x0) / (x1 - x0) * pw
        out.append(f'<text x="{x:.1f}" y="{mt + ph + 15}" text-anchor="middle">1e{e}</text>')
    for e in range(math.ceil(y0), math.floor(y1) + 1):
        y = mt + ph - (e - y0) / (y1 - y0) * ph
        out.append(f'<text x="{ml - 5}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        c = colors[i % len(colors)]
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys) if x > 0 and y > 0)
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{ml + pw + 8}" y="{mt + 14 * (i + 1)}" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
