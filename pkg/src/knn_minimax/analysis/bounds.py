"""Numeric evaluators of the concentration and bias bounds for the k-NN
plug-in estimate, plus the excess-risk identity used as a low-variance
estimator."""

from __future__ import annotations

import math

import numpy as np


def hoeffding_bound(k: int, s: float) -> float:
    """P(|eta_hat - E eta_hat| > s) <= 2 exp(-2 k s^2)."""
    return 2.0 * math.exp(-2.0 * k * s * s)


def misclass_bound(k: int, eps: float, delta_bias: float) -> float:
    """Pointwise misclassification bound 2 exp(-2k (eps - Delta)_+^2)."""
    gap = max(eps - delta_bias, 0.0)
    return 2.0 * math.exp(-2.0 * k * gap * gap)


def bias_bound(L: float, kappa: float, k: int, n: int, a: float, d: int) -> float:
    """|E eta_hat(x) - eta(x)| <= L (2/kappa)^(1/d) (k/(n a))^(1/d) + 2 exp(-3k/14)
    on the level set {mu >= a}."""
    return L * (2.0 / kappa) ** (1.0 / d) * (k / (n * a)) ** (1.0 / d) + 2.0 * math.exp(-3.0 * k / 14.0)


def bennett_bound(x: float, v: float, b: float) -> float:
    """P(S >= x) <= exp(-x^2 / (2 (v + b x / 3))) for summands bounded by b."""
    return math.exp(-x * x / (2.0 * (v + b * x / 3.0)))


def poisson_bound(n: int, k: int, t: float) -> float:
    """Deviation bound for the aggregated rule with fixed per-class sample
    sizes, obtained through Poissonization:
    2 pi n [2 exp(-2 k t^2) + 1{t <= 1} e^-n]."""
    return 2.0 * math.pi * n * (2.0 * math.exp(-2.0 * k * t * t) + (math.exp(-n) if abs(t) <= 1 else 0.0))


def excess_risk_identity(eta_values, predictions, bayes_predictions) -> float:
    """Monte Carlo estimate of R(Psi) - R(Phi*) = E[|2 eta(X) - 1| 1{Psi != Phi*}].

    Averages over test points; unlike the difference of two test errors it
    never goes negative and carries no label noise.
    """
    eta_values = np.asarray(eta_values, dtype=np.float64)
    disagree = np.asarray(predictions) != np.asarray(bayes_predictions)
    return float(np.mean(np.abs(2.0 * eta_values - 1.0) * disagree))
