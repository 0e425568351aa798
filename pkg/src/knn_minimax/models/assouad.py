"""Assouad-cube networks used as lower-bound stress generators (d = 1).

``m`` disjoint balls ``B_j = B(x_j, 2/q)`` with centers ``x_j = 5j/q`` carry
a bump perturbation of the regression function around 1/2:

    eta(x) = (1 + sigma_j * c_phi/q * phi(q|x - x_j|)) / 2   on B_j
    eta(x) = 1/2                                             elsewhere

Each ball has mass ``omega``; the remaining ``1 - m*omega`` is spread
uniformly over ``A1``, the interval ``[-(5m+5)/q, (5m+5)/q]`` minus the balls.
The ``tent`` variant replaces the flat density on a ball by a tent of
half-width ``q**-gamma`` (so the minimal-mass property fails for gamma > 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from ..core import Dataset, as_generator
from ..errors import InvalidNetwork, QuadratureFailure


def _h(s):
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)


def bump(r):
    """C-infinity non-increasing profile: 1 on [0, 1], 0 on [3/2, inf)."""
    r = np.asarray(r, dtype=np.float64)
    s = np.clip(3.0 - 2.0 * r, 0.0, 1.0)  # s = 1 at r = 1, s = 0 at r = 3/2
    a, c = _h(s), _h(1.0 - s)
    out = np.where(r <= 1.0, 1.0, np.where(r >= 1.5, 0.0, a / np.where(a + c > 0, a + c, 1.0)))
    return out if out.ndim else float(out)


def bump_derivative(r):
    r = np.asarray(r, dtype=np.float64)
    s = np.clip(3.0 - 2.0 * r, 0.0, 1.0)
    a, c = _h(s), _h(1.0 - s)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(s > 0, a / np.where(s > 0, s, 1.0) ** 2, 0.0)
        dc = np.where(s < 1, c / np.where(s < 1, 1.0 - s, 1.0) ** 2, 0.0)
        ds = (da * c + a * dc) / (a + c) ** 2
    out = np.where((r > 1.0) & (r < 1.5), -2.0 * ds, 0.0)
    return out if out.ndim else float(out)


def bump_derivative_sup(grid: int = 200_001) -> float:
    r = np.linspace(1.0, 1.5, grid)
    return float(np.max(np.abs(bump_derivative(r))))


@dataclass(frozen=True)
class AssouadNetwork:
    q: int
    m: int
    omega: float
    sigma: tuple = ()
    c_phi: float = 1.0
    variant: str = "constant"
    gamma: float = 1.0
    dim = 1
    family = "assouad"

    def __post_init__(self):
        sigma = tuple(int(s) for s in (self.sigma or (1,) * int(self.m)))
        object.__setattr__(self, "sigma", sigma)
        if int(self.q) != self.q or self.q < 2:
            raise InvalidNetwork("q must be an integer >= 2")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidNetwork("m must be an integer >= 1")
        if not (0 < self.omega <= 1.0 / self.m + 1e-15):
            raise InvalidNetwork("need 0 < omega <= 1/m")
        if len(sigma) != self.m or any(s not in (-1, 1) for s in sigma):
            raise InvalidNetwork("sigma must have m entries in {-1, +1}")
        if self.c_phi < 0 or self.c_phi > self.q:
            raise InvalidNetwork("need 0 <= c_phi <= q so that eta stays in [0, 1]")
        if self.variant not in ("constant", "tent"):
            raise InvalidNetwork(f"unknown variant {self.variant!r}")
        if self.variant == "tent" and self.gamma < 1:
            raise InvalidNetwork("tent variant needs gamma >= 1")

    @cached_property
    def centers(self) -> np.ndarray:
        return 5.0 * np.arange(self.m) / self.q

    @property
    def radius(self) -> float:
        return 2.0 / self.q

    @property
    def half_extent(self) -> float:
        return (5.0 * self.m + 5.0) / self.q

    @property
    def a1_length(self) -> float:
        return 2.0 * self.half_extent - self.m * 2.0 * self.radius

    @property
    def a1_density(self) -> float:
        return (1.0 - self.m * self.omega) / self.a1_length

    @property
    def label(self) -> str:
        extra = f",gamma={self.gamma:g}" if self.variant == "tent" else ""
        return f"assouad(q={self.q},m={self.m},omega={self.omega:g},{self.variant}{extra})"

    def _nearest_ball(self, x):
        x = np.asarray(x, dtype=np.float64)
        j = np.clip(np.rint(x * self.q / 5.0), 0, self.m - 1).astype(np.int64)
        return j, np.abs(x - self.centers[j])

    def eta_at(self, x):
        j, r = self._nearest_ball(x)
        sig = np.asarray(self.sigma)[j]
        out = 0.5 * (1.0 + sig * self.c_phi / self.q * np.asarray(bump(self.q * r)))
        return out if out.ndim else float(out)

    def density_at(self, x):
        x = np.asarray(x, dtype=np.float64)
        j, r = self._nearest_ball(x)
        inside = r < self.radius
        if self.variant == "constant":
            ball = np.full(x.shape, self.omega / (2.0 * self.radius))
        else:
            qg = self.q ** self.gamma
            ball = self.omega * qg * np.clip(1.0 - r * qg, 0.0, None)
        outside = np.where(np.abs(x) <= self.half_extent, self.a1_density, 0.0)
        out = np.where(inside, ball, outside)
        return out if out.ndim else float(out)

    def quadrature_breaks(self) -> list[float]:
        pts = [-self.half_extent, self.half_extent]
        for c in self.centers:
            pts += [c - self.radius, c + self.radius, c - 1.5 / self.q, c + 1.5 / self.q, c - 1.0 / self.q, c + 1.0 / self.q, c]
            if self.variant == "tent":
                w = self.q ** -self.gamma
                pts += [c - w, c + w]
        return sorted(set(pts))

    def mass(self, lo: float, hi: float) -> float:
        """P(lo < X <= hi) in closed form (piecewise linear / uniform pieces)."""
        total = 0.0
        # A1: uniform on [-H, H] minus the balls
        H = self.half_extent
        a, b = max(lo, -H), min(hi, H)
        if b > a:
            length = b - a
            for c in self.centers:
                length -= max(0.0, min(b, c + self.radius) - max(a, c - self.radius))
            total += self.a1_density * length
        for c in self.centers:
            if self.variant == "constant":
                seg = max(0.0, min(hi, c + self.radius) - max(lo, c - self.radius))
                total += self.omega * seg / (2.0 * self.radius)
            else:
                total += self.omega * (_tent_cdf((hi - c) * self.q ** self.gamma) - _tent_cdf((lo - c) * self.q ** self.gamma))
        return total

    def sample_features(self, n: int, stream) -> np.ndarray:
        gen = as_generator(stream)
        probs = np.append(np.full(self.m, self.omega), max(0.0, 1.0 - self.m * self.omega))
        probs = probs / probs.sum()
        comp = gen.choice(self.m + 1, size=n, p=probs)
        u = gen.random(n)
        x = np.empty(n)
        in_ball = comp < self.m
        c = self.centers[np.minimum(comp, self.m - 1)]
        if self.variant == "constant":
            x[in_ball] = c[in_ball] + self.radius * (2.0 * u[in_ball] - 1.0)
        else:
            # symmetric triangular on [-1, 1] by inverse CDF
            v = u[in_ball]
            t = np.where(v < 0.5, np.sqrt(2.0 * v) - 1.0, 1.0 - np.sqrt(2.0 * (1.0 - v)))
            x[in_ball] = c[in_ball] + t * self.q ** -self.gamma
        x[~in_ball] = self._sample_a1(u[~in_ball])
        return x

    def _sample_a1(self, u: np.ndarray) -> np.ndarray:
        # map [0, len(A1)) onto the gaps between balls
        H = self.half_extent
        starts, lengths = [], []
        left = -H
        for c in self.centers:
            starts.append(left)
            lengths.append(c - self.radius - left)
            left = c + self.radius
        starts.append(left)
        lengths.append(H - left)
        starts, lengths = np.array(starts), np.array(lengths)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        t = u * cum[-1]
        k = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(lengths) - 1)
        return starts[k] + (t - cum[k])

    def sample(self, n: int, stream) -> Dataset:
        gen = as_generator(stream)
        x = self.sample_features(n, gen)
        y = (gen.random(n) < self.eta_at(x)).astype(np.int64)
        return Dataset(x.reshape(-1, 1), y, dim=1)

    def bayes_classify(self, x):
        out = (np.asarray(self.eta_at(x)) > 0.5).astype(np.int64)
        return out if out.ndim else int(out)

    @cached_property
    def bayes_risk(self) -> float:
        """E[min(eta, 1 - eta)] = 1/2 - E|eta - 1/2|, by quadrature over the bumps."""
        gap = 0.0
        err = 0.0
        for c in self.centers:
            val, e = integrate.quad(
                lambda x: abs(float(self.eta_at(x)) - 0.5) * float(self.density_at(x)),
                c - 1.5 / self.q, c + 1.5 / self.q,
                points=[c - 1.0 / self.q, c, c + 1.0 / self.q] + (
                    [c - self.q ** -self.gamma, c + self.q ** -self.gamma] if self.variant == "tent" else []),
                epsabs=1e-13, epsrel=1e-10, limit=200,
            )
            gap += val
            err += e
        if err > 1e-8:
            raise QuadratureFailure(f"Bayes risk quadrature error {err:.2e}")
        return 0.5 - gap


def _tent_cdf(t):
    # CDF of the symmetric triangular law on [-1, 1]
    t = min(max(t, -1.0), 1.0)
    return 0.5 * (1.0 + t) ** 2 if t < 0 else 1.0 - 0.5 * (1.0 - t) ** 2


def calibrated_network(q: int, alpha: float = 1.0, m: int = 4, **kw) -> AssouadNetwork:
    """A network with ``m * omega = q**-alpha``, the margin calibration."""
    return AssouadNetwork(q=q, m=m, omega=q ** -alpha / m, **kw)
