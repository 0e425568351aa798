"""One-dimensional location models ``X = eps*Z + (2Y-1)*b``.

``Y ~ Bernoulli(1/2)``, ``eps`` is a Rademacher sign and ``Z`` is a positive
random variable.  Class ``y`` has density ``f_y(x) = zeta(|x - (2y-1)b|)/2``
where ``zeta`` is the density of ``Z``; the marginal is ``(f_0 + f_1)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special, stats

from ..core import Dataset, as_generator
from ..errors import ConfigError, QuadratureFailure

# name -> (ordered parameter names, constructor of the frozen scipy law of Z)
FAMILIES = {
    "gauss": (("sigma",), lambda p: stats.halfnorm(scale=p["sigma"])),
    "laplace": (("lam",), lambda p: stats.expon(scale=1.0 / p["lam"])),
    "gamma": (("shape", "scale"), lambda p: stats.gamma(p["shape"], scale=p["scale"])),
    "cauchy": (("gamma",), lambda p: stats.halfcauchy(scale=p["gamma"])),
    "pareto": (("x0", "p"), lambda p: stats.pareto(p["p"], scale=p["x0"])),
    # F_g(t) = 1 - (1+t)^(-g) is the Lomax law with shape g
    "powerlaw": (("g",), lambda p: stats.lomax(p["g"])),
    # Z == 0; the limit of a Laplace law with infinite rate
    "degenerate": ((), None),
}

DEFAULT_PARAMS = {
    "gauss": {"sigma": 1.0},
    "laplace": {"lam": 1.0},
    "gamma": {"shape": 2.0, "scale": 1.0},
    "cauchy": {"gamma": 1.0},
    "pareto": {"x0": 1.0, "p": 2.0},
    "powerlaw": {"g": 1.0},
    "degenerate": {},
}


@dataclass(frozen=True)
class LocationModel:
    family: str
    params: dict = field(default_factory=dict)
    b: float = 1.0
    dim = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        names = FAMILIES[self.family][0]
        params = {**DEFAULT_PARAMS[self.family], **dict(self.params)}
        extra = set(params) - set(names)
        if extra:
            raise ConfigError(f"unknown parameters for {self.family}: {sorted(extra)}")
        for key in names:
            val = float(params[key])
            if not (val > 0 and math.isfinite(val)):
                raise ConfigError(f"{self.family}.{key} must be positive, got {val}")
            params[key] = val
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ConfigError(f"b must be positive, got {self.b}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "b", float(self.b))

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items())), self.b))

    @cached_property
    def z(self):
        make = FAMILIES[self.family][1]
        return None if make is None else make(self.params)

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}({inner}),b={self.b:g}"

    # densities -------------------------------------------------------

    def _log_zeta(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.z is None:
            return np.where(t == 0, np.inf, -np.inf)
        with np.errstate(divide="ignore"):
            return self.z.logpdf(t)

    def log_class_density(self, x, y: int):
        """log f_y(x)."""
        x = np.asarray(x, dtype=np.float64)
        return self._log_zeta(np.abs(x - (2 * y - 1) * self.b)) - math.log(2.0)

    def class_density(self, x, y: int):
        return np.exp(self.log_class_density(x, y))

    def density_at(self, x):
        """Marginal density; +inf at the atoms of the degenerate model."""
        with np.errstate(over="ignore"):
            out = 0.5 * (self.class_density(x, 0) + self.class_density(x, 1))
        return out if np.ndim(out) else float(out)

    def log_density_at(self, x):
        out = np.logaddexp(self.log_class_density(x, 0), self.log_class_density(x, 1)) - math.log(2.0)
        return out if np.ndim(out) else float(out)

    def eta_at(self, x):
        """P(Y=1 | X=x), computed on the log scale; 1/2 where both classes vanish."""
        l0 = self.log_class_density(x, 0)
        l1 = self.log_class_density(x, 1)
        with np.errstate(invalid="ignore"):
            diff = l1 - l0
            out = special.expit(diff)
        both_zero = np.isneginf(l0) & np.isneginf(l1)
        both_inf = np.isposinf(l0) & np.isposinf(l1)
        out = np.where(both_zero | both_inf | np.isnan(diff), 0.5, out)
        out = np.where(np.isposinf(l1) & ~np.isposinf(l0), 1.0, out)
        out = np.where(np.isposinf(l0) & ~np.isposinf(l1), 0.0, out)
        return out if np.ndim(out) else float(out)

    # distribution functions ----------------------------------------------

    def _z_cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.z is None:
            return (t >= 0).astype(np.float64)
        return self.z.cdf(t)

    def _signed_cdf(self, u):
        # CDF of eps*Z
        u = np.asarray(u, dtype=np.float64)
        if self.z is None:
            return np.where(u < 0, 0.0, 1.0)
        pos = 0.5 + 0.5 * self.z.cdf(np.abs(u))
        neg = 0.5 * self.z.sf(np.abs(u))
        return np.where(u >= 0, pos, neg)

    def cdf(self, x):
        out = 0.5 * (self._signed_cdf(np.asarray(x) + self.b) + self._signed_cdf(np.asarray(x) - self.b))
        return out if np.ndim(out) else float(out)

    def mass(self, lo: float, hi: float) -> float:
        """P(lo < X <= hi), from the closed-form CDF."""
        return float(self.cdf(hi) - self.cdf(lo))

    # sampling ------------------------------------------------------------

    def sample_z(self, n: int, gen: np.random.Generator) -> np.ndarray:
        u = gen.random(n)
        if self.z is None:
            return np.zeros(n)
        return self.z.ppf(u)

    def sample(self, n: int, stream) -> Dataset:
        gen = as_generator(stream)
        y = gen.integers(0, 2, size=n)
        eps = 2 * gen.integers(0, 2, size=n) - 1
        z = self.sample_z(n, gen)
        x = eps * z + (2 * y - 1) * self.b
        return Dataset(x.reshape(-1, 1), y, dim=1)

    def sample_features(self, n: int, stream) -> np.ndarray:
        return self.sample(n, stream).X[:, 0]

    # Bayes oracle ----------------------------------------------------------

    @property
    def monotone_zeta(self) -> bool:
        """True when the density of Z is non-increasing on [0, inf)."""
        if self.family == "gamma":
            return self.params["shape"] <= 1.0
        return self.family != "pareto"

    def bayes_classify(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.monotone_zeta:
            out = (x > 0).astype(np.int64)
        else:
            out = (np.asarray(self.eta_at(x)) > 0.5).astype(np.int64)
        return out if out.ndim else int(out)

    @cached_property
    def bayes_risk(self) -> float:
        """Analytic Bayes risk.

        With a non-increasing ``zeta`` the Bayes rule is ``1{x > 0}`` and an
        error requires the sign to push the point across 0, so
        ``R* = P(Z > b)/2``.  Other families fall back to quadrature of
        ``min(f_0, f_1)/2``.
        """
        b = self.b
        p = self.params
        f = self.family
        if f == "degenerate":
            return 0.0
        if f == "gauss":
            return float(stats.norm.sf(b / p["sigma"]))
        if f == "laplace":
            return 0.5 * math.exp(-p["lam"] * b)
        if f == "cauchy":
            return 0.5 * (1.0 - (2.0 / math.pi) * math.atan(b / p["gamma"]))
        if f == "powerlaw":
            return 0.5 * (1.0 + b) ** (-p["g"])
        if f == "gamma" and self.monotone_zeta:
            return 0.5 * float(self.z.sf(b))
        return self.bayes_risk_quadrature()

    def bayes_risk_quadrature(self, rtol: float = 1e-8) -> float:
        """R* = (1/2) * integral of min(f_0, f_1), by adaptive quadrature."""
        if self.z is None:
            return 0.0

        def integrand(x):
            return 0.5 * min(float(self.class_density(x, 0)), float(self.class_density(x, 1)))

        # the integrand is symmetric in x; integrate the right half-line
        breaks = sorted({0.0, self.b} | self._support_breaks())
        total, err = 0.0, 0.0
        edges = breaks + [np.inf]
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=500)
            total += val
            err += e
        total *= 2.0
        err *= 2.0
        if total > 0 and err > 10 * rtol * total + 1e-14:
            raise QuadratureFailure(f"Bayes risk quadrature error {err:.2e} exceeds tolerance")
        return total

    def _support_breaks(self) -> set[float]:
        if self.family == "pareto":
            x0 = self.params["x0"]
            return {v for v in (x0 - self.b, x0 + self.b) if v > 0}
        return set()

    def quadrature_breaks(self) -> list[float]:
        pts = {-self.b, 0.0, self.b}
        for v in self._support_breaks():
            pts |= {v, -v}
        return sorted(pts)

    def gradient_log_density(self, x, h: float = 1e-5):
        x = np.asarray(x, dtype=np.float64)
        return (self.log_density_at(x + h) - self.log_density_at(x - h)) / (2 * h)


@dataclass(frozen=True)
class ClassConditional:
    """The law of X given Y=label under a location model."""

    model: LocationModel
    y: int
    dim = 1

    @property
    def label(self) -> str:
        return f"{self.model.label}|y={self.y}"

    def density_at(self, x):
        out = self.model.class_density(x, self.y)
        return out if np.ndim(out) else float(out)

    def log_density_at(self, x):
        out = self.model.log_class_density(x, self.y)
        return out if np.ndim(out) else float(out)

    def gradient_log_density(self, x, h: float = 1e-5):
        x = np.asarray(x, dtype=np.float64)
        return (self.log_density_at(x + h) - self.log_density_at(x - h)) / (2 * h)

    def sample_features(self, n: int, stream) -> np.ndarray:
        gen = as_generator(stream)
        eps = 2 * gen.integers(0, 2, size=n) - 1
        z = self.model.sample_z(n, gen)
        return eps * z + (2 * self.y - 1) * self.model.b

    def quadrature_breaks(self) -> list[float]:
        return self.model.quadrature_breaks()


@dataclass(frozen=True)
class UniformDensity:
    """Uniform law on ``[lo, hi]``."""

    lo: float = 0.0
    hi: float = 1.0
    dim = 1

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigError("need hi > lo")

    def density_at(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)
        return out if out.ndim else float(out)

    def sample_features(self, n: int, stream) -> np.ndarray:
        return as_generator(stream).uniform(self.lo, self.hi, size=n)

    def quadrature_breaks(self) -> list[float]:
        return [self.lo, self.hi]
