"""Monte Carlo and quadrature checkers for the margin, minimal-mass and tail
assumptions, and the gradient criterion for the minimal-mass property.

A passing check is evidence on the sampled probes, not a proof: the
assumptions quantify over every point and every small radius.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from ..core import as_generator
from ..errors import QuadratureFailure


@dataclass
class AssumptionReport:
    assumption: str
    parameters: dict
    estimate: float
    mc_se: float | None
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def _features(model, n_mc: int, stream) -> np.ndarray:
    return np.asarray(model.sample_features(n_mc, as_generator(stream)), dtype=np.float64)


def _fraction_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def empirical_tail(model, epsilon, n_mc: int, stream):
    """Fraction of draws whose density is below ``epsilon``.

    ``epsilon`` may be an array; all levels share one sample, so the curve
    is exactly non-decreasing.
    """
    x = _features(model, n_mc, stream)
    mu = np.sort(np.asarray(model.density_at(x), dtype=np.float64))
    eps = np.asarray(epsilon, dtype=np.float64)
    out = np.searchsorted(mu, eps, side="left") / n_mc
    return float(out) if out.ndim == 0 else out


def empirical_margin(model, t, n_mc: int, stream):
    """Fraction of draws with 0 < |eta(X) - 1/2| < t (array ``t`` allowed)."""
    x = _features(model, n_mc, stream)
    gap = np.abs(np.asarray(model.eta_at(x), dtype=np.float64) - 0.5)
    gap = np.sort(gap[gap > 0])
    t = np.asarray(t, dtype=np.float64)
    out = np.searchsorted(gap, t, side="left") / n_mc
    return float(out) if out.ndim == 0 else out


def ball_mass(model, x: float, delta: float, rtol: float = 1e-10) -> float:
    """P_X(B(x, delta)) for a 1-d model, by adaptive quadrature of its density."""
    lo, hi = x - delta, x + delta
    breaks = [p for p in getattr(model, "quadrature_breaks", lambda: [])() if lo < p < hi]

    def dens(u):
        return float(model.density_at(u))

    val, err = integrate.quad(dens, lo, hi, points=breaks or None, epsabs=1e-14, epsrel=rtol, limit=200)
    if err > 1e-6 * max(val, 1e-12) + 1e-12:
        raise QuadratureFailure(f"ball mass quadrature error {err:.2e} at x={x}")
    return val


def default_probes(model, n_quantiles: int = 99, n_mc: int = 20_000, seed: int = 0) -> np.ndarray:
    """Model quantiles 1%..99% plus the lowest-density points of a pilot sample."""
    x = _features(model, n_mc, np.random.default_rng(seed))
    qs = np.quantile(x, np.linspace(0.01, 0.99, n_quantiles))
    mu = np.asarray(model.density_at(x))
    low = x[np.argsort(mu)[:10]]
    centers = getattr(model, "centers", None)
    extra = np.asarray(centers) if centers is not None else np.empty(0)
    probes = np.concatenate([qs, low, extra])
    return np.unique(probes[np.asarray(model.density_at(probes)) > 0])


def minimal_mass_ratio(model, delta: float, probe_points=None, n_mc: int = 200_000, stream=0):
    """Minimum over probes of P_X(B(x, delta)) / (mu(x) delta^d).

    In one dimension the ball mass is integrated; in higher dimension it is
    a Monte Carlo fraction and the standard error of the minimising probe is
    returned alongside.  ``model`` needs ``density_at``, and
    ``sample_features`` when ``d > 1``.
    """
    d = getattr(model, "dim", 1)
    probes = default_probes(model) if probe_points is None else np.asarray(probe_points, dtype=np.float64)
    if d == 1:
        probes = probes.reshape(-1)
        ratios = [ball_mass(model, float(x), delta) / (float(model.density_at(x)) * delta) for x in probes]
        return float(min(ratios))
    probes = probes.reshape(-1, d)
    X = np.asarray(model.sample_features(n_mc, as_generator(stream)), dtype=np.float64).reshape(-1, d)
    best, best_se = math.inf, 0.0
    for x in probes:
        inside = np.sum((X - x) ** 2, axis=1) <= delta * delta
        p = inside.mean()
        scale = float(model.density_at(x)) * delta ** d
        if p / scale < best:
            best, best_se = p / scale, _fraction_se(p, n_mc) / scale
    return best, best_se


def gradient_criterion(log_density_grad, log_density, a_exponent: float, probe_points) -> float:
    """max over probes of ||grad phi|| / phi^a with phi = -ln mu.

    Small values on the low-density region mean the minimal-mass constant
    can be found; probes where phi <= 0 (density >= 1) give ``inf``.
    """
    worst = 0.0
    for x in np.atleast_1d(np.asarray(probe_points, dtype=np.float64)):
        phi = -float(log_density(x))
        grad = np.linalg.norm(np.atleast_1d(log_density_grad(x)))
        val = math.inf if phi <= 0 else grad / phi ** a_exponent
        worst = max(worst, val)
    return worst


# JSON-report wrappers ------------------------------------------------------

def tail_report(model, eps: float, n_mc: int, stream, psi=None) -> AssumptionReport:
    est = empirical_tail(model, eps, n_mc, stream)
    se = _fraction_se(est, n_mc)
    verdict = "not_assessed"
    if psi is not None:
        verdict = "consistent" if est <= psi(eps) + 3 * se else "violated"
    return AssumptionReport("tail", {"eps": eps, "n_mc": n_mc}, est, se, verdict)


def margin_report(model, t: float, n_mc: int, stream, alpha=None, C=None) -> AssumptionReport:
    est = empirical_margin(model, t, n_mc, stream)
    se = _fraction_se(est, n_mc)
    verdict = "not_assessed"
    if alpha is not None and C is not None:
        verdict = "consistent" if est <= C * t ** alpha + 3 * se else "violated"
    return AssumptionReport("margin", {"t": t, "n_mc": n_mc, "alpha": alpha, "C": C}, est, se, verdict)


def mass_report(model, delta: float, kappa=None, probes=None) -> AssumptionReport:
    est = minimal_mass_ratio(model, delta, probes)
    se = None
    if isinstance(est, tuple):
        est, se = est
    verdict = "not_assessed" if kappa is None else ("consistent" if est >= kappa else "violated")
    return AssumptionReport("mass", {"delta": delta, "kappa": kappa}, est, se, verdict)


def gradient_report(model, a_exponent: float, probes, threshold: float = 1.0) -> AssumptionReport:
    est = gradient_criterion(model.gradient_log_density, model.log_density_at, a_exponent, probes)
    verdict = "consistent" if est < threshold else "violated"
    return AssumptionReport("gradient", {"a": a_exponent, "probes": [float(p) for p in np.atleast_1d(probes)],
                                         "threshold": threshold}, est, None, verdict)
