"""Assumption checkers, bound evaluators, balance equations and rate fits."""

from .assumptions import (
    AssumptionReport, ball_mass, default_probes, empirical_margin, empirical_tail,
    gradient_criterion, gradient_report, margin_report, mass_report, minimal_mass_ratio, tail_report,
)
from .balance import RateQuery, TailSpec, rate_exponent, scale_exponent, solve_balance
from .bounds import (
    bennett_bound, bias_bound, excess_risk_identity, hoeffding_bound, misclass_bound, poisson_bound,
)
from .rates import fit_rate

__all__ = [
    "AssumptionReport", "ball_mass", "default_probes", "empirical_margin", "empirical_tail",
    "gradient_criterion", "gradient_report", "margin_report", "mass_report", "minimal_mass_ratio",
    "tail_report", "RateQuery", "TailSpec", "rate_exponent", "scale_exponent", "solve_balance",
    "bennett_bound", "bias_bound", "excess_risk_identity", "hoeffding_bound", "misclass_bound",
    "poisson_bound", "fit_rate",
]
