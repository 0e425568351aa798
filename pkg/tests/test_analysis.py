import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from knn_minimax.analysis import (
    RateQuery, TailSpec, bennett_bound, bias_bound, default_probes, empirical_margin, empirical_tail,
    excess_risk_identity, fit_rate, gradient_criterion, hoeffding_bound, margin_report, mass_report,
    minimal_mass_ratio, misclass_bound, poisson_bound, rate_exponent, scale_exponent, solve_balance,
    tail_report,
)
from knn_minimax.errors import ConfigError, NoBracket, NonPositiveInput
from knn_minimax.models import AssouadNetwork, ClassConditional, LocationModel, UniformDensity

LAPLACE = ClassConditional(LocationModel("laplace", {"lam": 1.0}, 1.0), 1)
GAUSS = LocationModel("gauss", {"sigma": 2.0}, 1.0)


# bounds -----------------------------------------------------------------------

def test_bound_examples():
    assert hoeffding_bound(10, 0.0) == 2.0
    assert misclass_bound(10, 0.1, 0.2) == 2.0
    assert misclass_bound(10, 0.2, 0.2) == 2.0
    # 1 * 2 * (100/1e6) + 2 exp(-300/14)
    assert bias_bound(1, 1, 100, 10**6, 1, 1) == pytest.approx(2.0e-4 + 9.8800e-10, rel=1e-4)
    assert bennett_bound(0.0, 1.0, 1.0) == 1.0
    assert poisson_bound(10, 5, 2.0) == pytest.approx(2 * math.pi * 10 * 2 * math.exp(-40))


# k s^2 <= 320 keeps exp(-2 k s^2) above the double-precision underflow
@given(st.integers(1, 500), st.floats(0.001, 0.8), st.floats(0.0, 0.5))
def test_bounds_in_range_and_decreasing(k, s, delta):
    for f in (lambda kk: hoeffding_bound(kk, s), lambda kk: misclass_bound(kk, s, delta)):
        assert 0 < f(k) <= 2.0
        assert f(k + 1) <= f(k)


@given(st.integers(1, 500), st.integers(1, 10**6), st.floats(0.01, 10), st.integers(1, 5))
def test_bias_bound_positive(k, n, a, d):
    assert bias_bound(1.0, 1.0, k, n, a, d) > 0


def test_identity_estimator():
    eta = np.array([0.9, 0.2, 0.5, 0.6])
    bayes = (eta > 0.5).astype(int)
    assert excess_risk_identity(eta, bayes, bayes) == 0.0
    assert excess_risk_identity(eta, 1 - bayes, bayes) == pytest.approx(np.mean(np.abs(2 * eta - 1)))


# tail -------------------------------------------------------------------------

def test_tail_examples():
    assert empirical_tail(LAPLACE, 1.0, 1000, 0) == 1.0
    assert empirical_tail(LAPLACE, 0.0, 1000, 0) == 0.0


def test_laplace_tail_calibration():
    est = empirical_tail(LAPLACE, 0.01, 10**6, 1)
    assert 0.018 <= est <= 0.022


def test_tail_curve_monotone():
    eps = np.logspace(-5, 0, 40)
    curve = empirical_tail(GAUSS, eps, 50_000, 2)
    assert np.all(np.diff(curve) >= 0)


# margin -----------------------------------------------------------------------

def test_margin_full_range():
    assert empirical_margin(GAUSS, 0.5, 10_000, 0) == pytest.approx(1.0, abs=1e-3)


def test_margin_flat_eta_is_zero():
    net = AssouadNetwork(8, 2, 0.1, c_phi=0.0)
    assert empirical_margin(net, 0.3, 10_000, 0) == 0.0


def test_gauss_margin_alpha_one():
    ts = np.array([0.05, 0.1, 0.2])
    ratios = empirical_margin(GAUSS, ts, 10**6, 3) / ts
    assert ratios.max() / ratios.min() <= 2.0


# minimal mass -----------------------------------------------------------------

def test_uniform_interior_ratio():
    assert minimal_mass_ratio(UniformDensity(), 0.01, [0.5]) == pytest.approx(2.0, rel=1e-10)


def test_gauss_mass_ratio():
    probes = np.linspace(-5, 5, 101)
    assert minimal_mass_ratio(LocationModel("gauss", {"sigma": 1.0}, 1.0), 0.01, probes) >= 1.9


def test_tent_network_breaks_mass():
    net = AssouadNetwork(32, 4, 1 / 128, variant="tent", gamma=2.0)
    assert minimal_mass_ratio(net, 0.01, [net.centers[0]]) == pytest.approx(1 / 10.24, rel=1e-9)


def test_default_probes_have_positive_density():
    p = default_probes(GAUSS)
    assert p.size > 50 and np.all(GAUSS.density_at(p) > 0)


class _Gauss2D:
    dim = 2

    def density_at(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        out = np.exp(-0.5 * np.sum(x * x, axis=1)) / (2 * math.pi)
        return out if out.size > 1 else float(out[0])

    def sample_features(self, n, gen):
        return gen.normal(size=(n, 2))


def test_mass_ratio_multivariate_reports_se():
    est, se = minimal_mass_ratio(_Gauss2D(), 0.3, [[0.0, 0.0], [1.0, 0.5]], n_mc=200_000, stream=1)
    assert se > 0
    assert abs(est - math.pi * 0.96) < 4 * se + 0.05  # ~pi for small delta, slightly lower at delta=0.3


# gradient criterion -----------------------------------------------------------

def test_gradient_gauss():
    c = 0.5 * math.log(2 * math.pi)
    val = gradient_criterion(lambda x: -x, lambda x: -x * x / 2 - c, 1.0, [10.0])
    assert val == pytest.approx(10 / (50 + c))


def test_gradient_laplace():
    val = gradient_criterion(LAPLACE.gradient_log_density, LAPLACE.log_density_at, 1.0, [21.0])
    assert val < 0.1


def test_gradient_failure_hook():
    val = gradient_criterion(lambda x: -math.exp(x), lambda x: -math.exp(x), 1.0, np.linspace(1, 5, 9))
    assert val >= 0.99


def test_gradient_nonpositive_phi_is_inf():
    assert gradient_criterion(lambda x: 0.0, lambda x: 0.5, 1.0, [0.0]) == math.inf


def test_reports_are_json():
    for rep in (tail_report(LAPLACE, 0.01, 10_000, 0, psi=lambda e: 2 * e),
                margin_report(GAUSS, 0.1, 10_000, 0, alpha=1.0, C=5.0),
                mass_report(GAUSS, 0.01, kappa=1.0, probes=[0.0, 1.0])):
        d = json.loads(json.dumps(rep.to_dict()))
        assert set(d) == {"assumption", "parameters", "estimate", "mc_se", "verdict"}
        assert d["verdict"] == "consistent"


# balance equations -------------------------------------------------------------

def test_balance_examples():
    low = solve_balance(TailSpec.identity(), RateQuery(1.0, 1, 1e4, "lower"))
    assert low["scale"] == pytest.approx(0.1, rel=1e-10) and low["rate"] == pytest.approx(0.01, rel=1e-10)
    up = solve_balance(TailSpec.identity(), RateQuery(1.0, 1, 1e5, "upper"))
    assert up["scale"] == pytest.approx(0.1, rel=1e-10) and up["k"] == 100
    pw = solve_balance(TailSpec.power(2.0), RateQuery(1.0, 1, 1e4, "upper"))
    assert pw["scale"] == pytest.approx(0.1, rel=1e-10) and pw["rate"] == pytest.approx(0.01, rel=1e-10)


@given(st.floats(0.1, 5.0), st.integers(1, 8), st.floats(2.0, 1e12), st.floats(0.2, 6.0),
       st.sampled_from(["lower", "upper"]))
def test_power_tail_closed_form(alpha, d, n, g, side):
    res = solve_balance(TailSpec.power(g), RateQuery(alpha, d, n, side))
    assert res["scale"] == pytest.approx(n ** -scale_exponent(alpha, d, side, g), rel=1e-9)
    assert res["rate"] == pytest.approx(n ** -rate_exponent(alpha, d, side, g), rel=1e-9)


def test_rate_exponents():
    assert rate_exponent(1.0, 1, "lower") == pytest.approx(2 / 4)
    assert rate_exponent(1.0, 1, "upper") == pytest.approx(2 / 5)
    assert rate_exponent(1.0, 1, "upper", g=4.0) == pytest.approx(2 / 3.5)


@given(st.floats(0.05, 4.0), st.floats(0.0, 3.0), st.floats(-30, -0.5))
def test_powerlog_inverse(g, r, log_eps):
    tail = TailSpec.powerlog(g, r)
    eps = math.exp(log_eps)
    if eps >= tail.monotone_limit:
        return
    assert tail.psi_inv(tail.psi(eps)) == pytest.approx(eps, rel=1e-9)


def test_powerlog_solution_satisfies_equation():
    tail, q = TailSpec.powerlog(1.0, 1.0), RateQuery(1.0, 1, 1e6, "upper")
    nu = solve_balance(tail, q)["scale"]
    assert tail.psi_inv(nu ** 2) * nu ** 3 == pytest.approx(1e-6, rel=1e-8)


def test_no_bracket():
    with pytest.raises(NoBracket):
        solve_balance(TailSpec.identity(), RateQuery(1.0, 1, 1e80, "upper"))


@pytest.mark.parametrize("bad", [dict(form="weird"), dict(form="identity", g=2.0), dict(form="power", g=-1.0),
                                 dict(form="power", g=1.0, r=1.0)])
def test_bad_tails(bad):
    with pytest.raises(ConfigError):
        TailSpec(**bad)


@pytest.mark.parametrize("bad", [(0.0, 1, 100), (1.0, 0, 100), (1.0, 1, 1), (1.0, 1.5, 100)])
def test_bad_queries(bad):
    with pytest.raises(ConfigError):
        RateQuery(*bad)


# rate fitting ------------------------------------------------------------------

def test_fit_exact_power():
    fit = fit_rate([(n, n ** -0.5) for n in (1e2, 1e3, 1e4)])
    assert fit["slope"] == pytest.approx(-0.5, abs=1e-12) and fit["r2"] == pytest.approx(1.0)
    fit = fit_rate([(n, 3 * n ** -0.4) for n in (1e2, 1e3, 1e4, 1e5)])
    assert fit["slope"] == pytest.approx(-0.4) and fit["intercept"] == pytest.approx(math.log(3))


def test_fit_errors():
    with pytest.raises(NonPositiveInput):
        fit_rate([(100, 0.1), (1000, 0.0), (10_000, 0.01)])
    with pytest.raises(ValueError):
        fit_rate([(100, 0.1), (1000, 0.05)])


def test_fit_noisy_coverage():
    rng = np.random.default_rng(8)
    n = np.logspace(2, 4, 8)
    hits = sum(abs(fit_rate(zip(n, n ** -0.5 * np.exp(rng.normal(0, 0.05, 8))))["slope"] + 0.5) <= 0.08
               for _ in range(1000))
    assert hits >= 950
