"""Balance equations linking n, d, the margin exponent alpha and the tail
function psi to the rate scale.

lower side:  1/n = eps^(2+d) * psi^-1(eps^alpha)
upper side:  1/n = psi^-1(nu^(1+alpha)) * nu^(2+d)

The excess-risk rate is scale^(1+alpha) and the matching neighbor count on
the upper side is k = nu^-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from ..errors import ConfigError, NoBracket

FORMS = ("identity", "power", "powerlog")
BRACKET = (1e-12, 1.0)


@dataclass(frozen=True)
class TailSpec:
    """psi(eps) = C * eps^g * ln(1/eps)^r."""

    form: str = "identity"
    g: float = 1.0
    r: float = 0.0
    C: float = 1.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise ConfigError(f"unknown tail form {self.form!r}")
        if self.form == "identity" and (self.g != 1.0 or self.r != 0.0):
            raise ConfigError("identity tail takes no exponents")
        if self.form == "power" and self.r != 0.0:
            raise ConfigError("power tail takes no log exponent")
        if not (self.g > 0 and self.C > 0):
            raise ConfigError("tail needs g > 0 and C > 0")

    @classmethod
    def identity(cls) -> "TailSpec":
        return cls("identity")

    @classmethod
    def power(cls, g: float, C: float = 1.0) -> "TailSpec":
        return cls("power", g=g, C=C)

    @classmethod
    def powerlog(cls, g: float, r: float, C: float = 1.0) -> "TailSpec":
        return cls("powerlog", g=g, r=r, C=C)

    @property
    def monotone_limit(self) -> float:
        """psi is increasing on (0, monotone_limit)."""
        if self.r > 0:
            return min(1.0, math.exp(-self.r / self.g))
        return 1.0

    def psi(self, eps: float) -> float:
        if eps <= 0:
            return 0.0
        val = self.C * eps ** self.g
        if self.r:
            val *= math.log(1.0 / eps) ** self.r
        return val

    def log_psi(self, u: float) -> float:
        """ln psi(e^u) for u < 0, free of underflow."""
        val = math.log(self.C) + self.g * u
        if self.r:
            val += self.r * math.log(-u)
        return val

    def psi_inv(self, y: float) -> float:
        """Smallest eps with psi(eps) = y, capped at the monotone range."""
        if y <= 0:
            return 0.0
        if self.form != "powerlog":
            return min((y / self.C) ** (1.0 / self.g), 1.0)
        top = self.monotone_limit
        hi = math.log(top) if top < 1.0 else -1e-15
        target = math.log(y)
        if target >= self.log_psi(hi):
            return top
        lo = min(hi - 1.0, target / self.g)
        while self.log_psi(lo) > target:
            lo *= 2.0
        u = brentq(lambda t: self.log_psi(t) - target, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
        return math.exp(u)


@dataclass(frozen=True)
class RateQuery:
    alpha: float
    d: int
    n: float
    side: str = "upper"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError("d must be a positive integer")
        if not self.n >= 2:
            raise ConfigError("n must be >= 2")
        if self.side not in ("lower", "upper"):
            raise ConfigError("side must be 'lower' or 'upper'")


def _residual(tail: TailSpec, q: RateQuery, u: float) -> float:
    """ln of (right side * n) at scale e^u; increasing in u, zero at the root."""
    s = math.exp(u)
    inner = s ** q.alpha if q.side == "lower" else s ** (1.0 + q.alpha)
    inv = tail.psi_inv(inner)
    if inv <= 0:
        return -math.inf
    return (2.0 + q.d) * u + math.log(inv) + math.log(q.n)


def solve_balance(tail: TailSpec, query: RateQuery) -> dict:
    """Root of the balance equation on [1e-12, 1], found on the log scale.

    Returns ``{"scale", "rate", "k"}`` with rate = scale^(1+alpha) and
    k = round(scale^-2) (the neighbor count is meaningful on the upper side).
    """
    lo, hi = math.log(BRACKET[0]), math.log(BRACKET[1])
    f_lo, f_hi = _residual(tail, query, lo), _residual(tail, query, hi)
    if not (f_lo < 0 < f_hi):
        if f_lo == 0:
            u = lo
        elif f_hi == 0:
            u = hi
        else:
            raise NoBracket(f"balance equation has no root in {BRACKET} for n={query.n}")
    else:
        u = brentq(lambda t: _residual(tail, query, t), lo, hi, xtol=1e-12, rtol=1e-15, maxiter=500)
    scale = math.exp(u)
    return {"scale": scale, "rate": scale ** (1.0 + query.alpha), "k": int(round(scale ** -2.0))}


def scale_exponent(alpha: float, d: int, side: str = "upper", g: float = 1.0) -> float:
    """Exponent e with scale = n^-e for the tail psi(eps) = eps^g."""
    if side == "lower":
        return 1.0 / (2.0 + d + alpha / g)
    return 1.0 / (2.0 + d + (1.0 + alpha) / g)


def rate_exponent(alpha: float, d: int, side: str = "upper", g: float = 1.0) -> float:
    """Excess-risk exponent (1+alpha) * scale_exponent.

    With g = 1 this is (1+alpha)/(2+alpha+d) on the lower side and
    (1+alpha)/(3+alpha+d) on the upper side.
    """
    return (1.0 + alpha) * scale_exponent(alpha, d, side, g)
