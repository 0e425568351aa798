"""Acceptance gate: one test group per criterion, each recording a verdict
that is printed as a PASS/FAIL line at the end of the run.

Criteria 1, 2 and 6 share one full-scale run of the comparison table
(1000 replications, test size 200; about a minute on one core).
"""

import math

import numpy as np
import pytest
from fractions import Fraction

from conftest import record
from knn_minimax import harness
from knn_minimax.analysis import (
    RateQuery, TailSpec, empirical_margin, empirical_tail, fit_rate, hoeffding_bound, minimal_mass_ratio,
    poisson_bound, rate_exponent, solve_balance,
)
from knn_minimax.core import Dataset
from knn_minimax.models import (
    TABLE2_MODELS, AssouadNetwork, ClassConditional, LocationModel, bump_derivative_sup, calibrated_network,
)
from knn_minimax.neighbors import BruteIndex, KDTreeIndex
from knn_minimax.rules import KSchedule

pytestmark = pytest.mark.slow

SEED = 20241016

# published mean excess risk x 100 with its standard error, per (row, n):
# (standard, standard_se, sliced, sliced_se)
REFERENCE = {
    ("gauss_b1_s2", 100): (19.2, 0.6, 18.1, 0.6),
    ("gauss_b1_s2", 500): (16.4, 0.5, 13.9, 0.5),
    ("gauss_b1_s2", 1000): (15.4, 0.5, 12.0, 0.5),
    ("cauchy_b0.5_g0.5", 100): (2.6, 0.2, 1.9, 0.2),
    ("cauchy_b0.5_g0.5", 500): (1.4, 0.1, 1.2, 0.1),
    ("cauchy_b0.5_g0.5", 1000): (0.9, 0.05, 0.8, 0.05),
    ("cauchy_b0.5_g1", 100): (4.4, 0.3, 3.6, 0.2),
    ("cauchy_b0.5_g1", 500): (3.1, 0.3, 2.2, 0.2),
    ("cauchy_b0.5_g1", 1000): (2.3, 0.2, 1.4, 0.2),
    ("power_b0.5_g1", 100): (3.8, 0.3, 3.0, 0.3),
    ("power_b0.5_g1", 500): (2.7, 0.2, 2.1, 0.2),
    ("power_b0.5_g1", 1000): (1.9, 0.2, 1.5, 0.1),
    ("power_b0.5_g2", 100): (2.0, 0.2, 1.7, 0.2),
    ("power_b0.5_g2", 500): (1.2, 0.2, 1.0, 0.1),
    ("power_b0.5_g2", 1000): (0.7, 0.1, 0.6, 0.1),
}


@pytest.fixture(scope="session")
def table2_full():
    return harness.run_table2(seed=SEED, replications=1000, n_test=200)


@pytest.fixture(scope="session")
def table2_ci():
    return harness.run_table2(seed=SEED + 1, replications=100, n_test=200)


def _table_misses(rows, k_se):
    misses = []
    for r in rows:
        ref, ref_se = REFERENCE[(r.model, r.n)][:2]
        ours, se = 100 * r.standard, 100 * r.standard_se
        tol = k_se * math.hypot(ref_se, se)
        if abs(ours - ref) > tol:
            misses.append(f"{r.model}@{r.n}: {ours:.2f} vs {ref} (tol {tol:.2f})")
    return misses


# 1 -------------------------------------------------------------------------------

def test_criterion_1_table_full_scale(table2_full):
    rows, _ = table2_full
    misses = _table_misses(rows, 3.0)
    record(1, not misses, f"1000 reps, +-3 SE: {15 - len(misses)}/15 cells match"
           + (f" [misses: {', '.join(misses)}]" if misses else ""))
    assert not misses, misses


def test_criterion_1_table_ci_scale(table2_ci):
    rows, _ = table2_ci
    misses = _table_misses(rows, 5.0)
    record(1, not misses, f"100 reps, +-5 SE: {15 - len(misses)}/15 cells match")
    assert not misses, misses


# 2 -------------------------------------------------------------------------------

def test_criterion_2_sliced_improvement(table2_full):
    rows, _ = table2_full
    worse = [f"{r.model}@{r.n}: sliced-standard = {(r.sliced - r.standard) / r.paired_se:+.1f} paired SE"
             for r in rows if r.sliced > r.standard + r.paired_se]
    gauss = next(r for r in rows if r.model == "gauss_b1_s2" and r.n == 1000)
    ok = not worse and gauss.improvement >= 10.0
    record(2, ok, f"Gauss n=1000 improvement {gauss.improvement:.1f}%; "
           f"{15 - len(worse)}/15 cells within +1 paired SE"
           + (f" [fails: {', '.join(worse)}]" if worse else ""))
    assert gauss.improvement >= 10.0
    assert not worse, worse


# 3 -------------------------------------------------------------------------------

@pytest.fixture(scope="session")
def rate_rows():
    return harness.run_rates([0.5, 1.0, 2.0, 4.0], [100, 316, 1000, 3162, 10_000], seed=SEED, replications=200)


def test_criterion_3_rate_degradation(rate_rows):
    slopes = [r.slope for r in rate_rows]
    monotone = all(b < a for a, b in zip(slopes, slopes[1:]))
    gap = abs(slopes[-1]) - abs(slopes[0])
    ok = monotone and gap >= 0.15
    record(3, ok, "slopes " + ", ".join(f"g={r.g:g}: {r.slope:.3f}" for r in rate_rows) + f"; gap {gap:.3f}")
    assert monotone and gap >= 0.15


def test_rate_g4_near_balance_prediction(rate_rows):
    predicted = rate_exponent(1.0, 1, "upper", g=4.0)
    assert abs(-rate_rows[-1].slope - predicted) <= 0.15


# 4 -------------------------------------------------------------------------------

def test_criterion_4_balance_solver():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        alpha = float(rng.uniform(0.1, 5.0))
        d = int(rng.integers(1, 9))
        n = float(10 ** rng.uniform(0.5, 12))
        eps = solve_balance(TailSpec.identity(), RateQuery(alpha, d, n, "lower"))["scale"]
        nu = solve_balance(TailSpec.identity(), RateQuery(alpha, d, n, "upper"))["scale"]
        worst = max(worst, abs(eps / n ** (-1 / (2 + alpha + d)) - 1), abs(nu / n ** (-1 / (3 + alpha + d)) - 1))
    exact = True
    for alpha in (Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)):
        for d in (1, 2, 3, 5):
            a = float(alpha)
            lo = Fraction(rate_exponent(a, d, "lower")).limit_denominator(1000)
            up = Fraction(rate_exponent(a, d, "upper")).limit_denominator(1000)
            exact &= lo == (1 + alpha) / (2 + alpha + d) and up == (1 + alpha) / (3 + alpha + d)
            # the solver's own rates scale with the same exponent
            ns = [1e3, 1e5, 1e7]
            fit = fit_rate((n, solve_balance(TailSpec.identity(), RateQuery(a, d, n, "upper"))["rate"]) for n in ns)
            exact &= abs(-fit["slope"] - float((1 + alpha) / (3 + alpha + d))) < 1e-9
    ok = worst < 1e-9 and exact
    record(4, ok, f"max relative error {worst:.1e} over 20 random (alpha, d, n); exponents exact: {exact}")
    assert ok


# 5 -------------------------------------------------------------------------------

def test_criterion_5_index_equivalence():
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for trial in range(1000):
        d = (1, 2, 3, 5)[trial % 4]
        n = int(rng.integers(1, 150))
        if trial % 2:
            X = rng.integers(-3, 4, size=(n, d)).astype(float)  # heavy ties
            q = rng.integers(-3, 4, size=d).astype(float)
        else:
            X = rng.normal(size=(n, d))
            q = rng.normal(size=d)
        data = Dataset(X, rng.integers(0, 2, n), dim=d)
        k = int(rng.integers(1, n + 1))
        leaf = int(rng.integers(1, 20))
        mismatches += KDTreeIndex(data, leaf).k_nearest(q, k) != BruteIndex(data).k_nearest(q, k)
    record(5, mismatches == 0, f"{1000 - mismatches}/1000 tree results identical to brute force")
    assert mismatches == 0


# 6 -------------------------------------------------------------------------------

def test_criterion_6_bayes_floor(table2_full):
    _, results = table2_full
    runs = list(results.values())
    net = AssouadNetwork(8, 4, 0.2, (1, -1, 1, -1), c_phi=8.0)
    runs.append(harness.run_excess_risk(harness.ExperimentConfig(
        net, 500, 200, 200, (KSchedule.standard(), KSchedule.fixed(1), KSchedule.compact()), SEED)))
    g = TABLE2_MODELS["gauss_b1_s2"]
    runs.append(harness.run_sda(ClassConditional(g, 0), ClassConditional(g, 1), 100, 7, 200, 300, SEED))
    below, cells = [], 0
    for res in runs:
        for name in res.schedules:
            s = res.stats(name)
            cells += 1
            if s.mean_risk < s.bayes_risk - 2 * s.std_error:
                below.append(f"{res.model}@{res.n_train}/{name}")
    record(6, not below, f"{cells - len(below)}/{cells} experiment cells at or above R* - 2 SE")
    assert not below, below


# 7 -------------------------------------------------------------------------------

def test_criterion_7_concentration_bounds():
    ks, ss, reps = [5, 20, 100], [0.05, 0.1, 0.2], 2000
    worst = -np.inf
    for i, model in enumerate(TABLE2_MODELS.values()):
        draws = harness.eta_hat_samples(model, [0.0, 0.5, 2.0], 500, ks, reps, seed=SEED + i)
        dev = np.abs(draws - draws.mean(axis=0))
        for a, k in enumerate(ks):
            for s in ss:
                p = (dev[:, :, a] > s).mean(axis=0)
                slack = 3 * np.sqrt(p * (1 - p) / reps)
                worst = max(worst, float(np.max(p - slack - hoeffding_bound(k, s))))
    g = TABLE2_MODELS["gauss_b1_s2"]
    f0, f1 = ClassConditional(g, 0), ClassConditional(g, 1)
    sda = harness.sda_eta_samples(f0, f1, 0.3, 50, 5, 5000, seed=SEED)
    sda_ok = True
    for t in (0.1, 0.3):
        p = np.mean(np.abs(sda - sda.mean()) > t)
        sda_ok &= p <= poisson_bound(50, 5, t) + 3 * math.sqrt(p * (1 - p) / sda.size)
    ok = worst <= 0 and sda_ok
    record(7, ok, f"max (empirical - 3 SE - bound) = {worst:.2e} over 5 models x 3 points x 9 (k, s); "
           f"Poissonized bound holds: {sda_ok}")
    assert ok


# 8 -------------------------------------------------------------------------------

def test_criterion_8_assouad_properties():
    # Lipschitz
    lip_ok = True
    for net in (AssouadNetwork(8, 4, 0.1, (1, -1, 1, -1)), AssouadNetwork(32, 3, 0.05, c_phi=4.0)):
        x = np.linspace(-0.1, net.centers[-1] + 0.1, 400_001)
        slope = np.max(np.abs(np.diff(net.eta_at(x)) / np.diff(x)))
        lip_ok &= slope <= 1.05 * net.c_phi * (bump_derivative_sup() + 1.0)
    # margin with m * omega = q^-alpha: one constant across q
    ts = np.array([0.01, 0.02, 0.05, 0.1, 0.2, 0.5])
    consts = []
    for q in (8, 16, 32):
        p = empirical_margin(calibrated_network(q, 1.0, m=4), ts, 10**6, SEED + q)
        consts.append(float(np.max(p / ts)))
    margin_ok = max(consts) / min(consts) <= 2.0
    # minimal mass
    deltas = [0.01, 0.03, 0.1]
    tent = AssouadNetwork(32, 4, 1 / 128, variant="tent", gamma=2.0)
    tent_ratio = max(minimal_mass_ratio(tent, d, [tent.centers[0]]) for d in deltas)
    gauss_ratio = min(minimal_mass_ratio(TABLE2_MODELS["gauss_b1_s2"], d) for d in deltas)
    ok = lip_ok and margin_ok and tent_ratio < 0.1 and gauss_ratio > 1.0
    record(8, ok, f"Lipschitz ok: {lip_ok}; margin C_q = {', '.join(f'{c:.2f}' for c in consts)}; "
           f"tent max ratio {tent_ratio:.3f}; Gauss min ratio {gauss_ratio:.3f}")
    assert ok


# 9 -------------------------------------------------------------------------------

def test_criterion_9_poissonization():
    g = TABLE2_MODELS["gauss_b1_s2"]
    out = harness.poissonization_check(ClassConditional(g, 0), ClassConditional(g, 1), 0.3, 50, 5, 10_000, SEED)
    ok = out["ks_distance"] < 0.05
    record(9, ok, f"KS distance {out['ks_distance']:.4f} (p = {out['p_value']:.2f})")
    assert ok


# 10 ------------------------------------------------------------------------------

def test_criterion_10_tail_calibration():
    laplace = ClassConditional(LocationModel("laplace", {"lam": 1.0}, 1.0), 1)
    eps = np.array([1e-4, 1e-3, 1e-2])
    ratios = empirical_tail(laplace, eps, 10**6, SEED) / eps
    ok = bool(np.all((ratios >= 1.8) & (ratios <= 2.2)))
    record(10, ok, "psi_hat(eps)/eps = " + ", ".join(f"{r:.3f}" for r in ratios))
    assert ok
