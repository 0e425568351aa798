"""Nearest-neighbor plug-in rules and the schedules that pick k.

Schedules (``n`` training points, dimension ``d``, margin exponent ``alpha``):

* ``fixed``    k as given
* ``compact``  floor(n^(2/(2+d)))
* ``general``  floor(n^(2/(3+alpha+d))), optionally ``+1``
* ``sliced``   k depends on the density level of the query point.  With
  ``t = n^(-alpha/(2+alpha+d))`` and ``r = mu(x)/t``, points with ``r >= 1``
  get the base value and slice ``j`` (``2^-(j+1) <= r < 2^-j``) gets the base
  shrunk by ``2^(-2j/(2+d))``.  The theoretical variant uses the base
  ``floor(n^(2/(2+alpha+d)) ln n)``; the empirical one drops the log and adds 1.

Every schedule clamps k to [1, n].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Dataset
from .errors import DimMismatch, EmptyNeighborhood, MissingDensity
from .neighbors import build_index

VARIANTS = ("fixed", "compact", "general", "sliced_theoretical", "sliced_empirical")


@dataclass(frozen=True)
class KSchedule:
    variant: str
    k: int = 0
    alpha: float = 1.0
    plus_one: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown schedule variant {self.variant!r}")
        if self.variant == "fixed" and self.k < 1:
            raise ValueError("fixed schedule needs k >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def fixed(cls, k: int) -> "KSchedule":
        return cls("fixed", k=int(k))

    @classmethod
    def compact(cls) -> "KSchedule":
        return cls("compact")

    @classmethod
    def general(cls, alpha: float = 1.0, plus_one: bool = False) -> "KSchedule":
        return cls("general", alpha=alpha, plus_one=plus_one)

    @classmethod
    def standard(cls, alpha: float = 1.0) -> "KSchedule":
        """The tuned standard rule of the comparison experiment: general + 1."""
        return cls("general", alpha=alpha, plus_one=True)

    @classmethod
    def sliced(cls, alpha: float = 1.0, empirical: bool = True) -> "KSchedule":
        return cls("sliced_empirical" if empirical else "sliced_theoretical", alpha=alpha)

    @property
    def is_sliced(self) -> bool:
        return self.variant.startswith("sliced")

    @property
    def name(self) -> str:
        if self.variant == "fixed":
            return f"fixed{self.k}"
        if self.variant == "compact":
            return "compact"
        if self.variant == "general":
            base = "standard" if self.plus_one else "general"
            return base if self.alpha == 1.0 else f"{base}:{self.alpha:g}"
        base = "sliced" if self.variant == "sliced_empirical" else "sliced-theory"
        return base if self.alpha == 1.0 else f"{base}:{self.alpha:g}"


def parse_schedule(text: str) -> KSchedule:
    """``standard``, ``general[:alpha]``, ``compact``, ``sliced[:alpha]``,
    ``sliced-theory[:alpha]`` or ``fixed:K``."""
    name, _, arg = text.strip().lower().partition(":")
    if name == "fixed":
        if not arg:
            raise ValueError("fixed schedule needs a k, e.g. fixed:5")
        return KSchedule.fixed(int(arg))
    alpha = float(arg) if arg else 1.0
    if name == "compact":
        return KSchedule.compact()
    if name == "general":
        return KSchedule.general(alpha)
    if name == "standard":
        return KSchedule.standard(alpha)
    if name == "sliced":
        return KSchedule.sliced(alpha, empirical=True)
    if name in ("sliced-theory", "sliced_theoretical", "sliced-theoretical"):
        return KSchedule.sliced(alpha, empirical=False)
    raise ValueError(f"unknown schedule {text!r}")


class DensitySource:
    """A density used by the sliced schedules: analytic or estimated."""

    def __init__(self, kind: str, fn: Callable):
        if kind not in ("analytic", "estimated"):
            raise ValueError(f"unknown density kind {kind!r}")
        self.kind = kind
        self._fn = fn

    @classmethod
    def analytic(cls, model) -> "DensitySource":
        return cls("analytic", model.density_at)

    @classmethod
    def estimated(cls, kde) -> "DensitySource":
        from .models.kde import kde_eval

        return cls("estimated", lambda x: kde_eval(kde, x))

    def __call__(self, x):
        return self._fn(x)


def eta_hat(labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyNeighborhood("no neighbor labels to average")
    return float(labels.mean())


def classify_vote(value) -> int:
    """1 iff the plug-in estimate is strictly above 1/2."""
    return int(value > 0.5)


def slice_index(ratio):
    """Slice j with 2^-(j+1) <= ratio < 2^-j; -1 when ratio >= 1.

    Uses ``frexp`` so the dyadic boundaries are exact.  A ratio of 0 maps
    to a very deep slice (the schedules then return k = 1).
    """
    ratio = np.asarray(ratio, dtype=np.float64)
    _, e = np.frexp(ratio)
    j = np.where(ratio >= 1.0, -1, -e)
    j = np.where(ratio > 0, j, np.iinfo(np.int32).max)
    return j.astype(np.int64)


def _floor(v):
    """Floor that snaps values within rounding noise of an integer
    (``1000 ** (2/3)`` evaluates to 99.99999999999997)."""
    v = np.asarray(v, dtype=np.float64)
    r = np.round(v)
    return np.where(np.abs(v - r) <= 1e-9 * np.maximum(1.0, np.abs(r)), r, np.floor(v))


def _sliced_k(schedule: KSchedule, n: int, d: int, mu) -> np.ndarray:
    a = schedule.alpha
    mu = np.asarray(mu, dtype=np.float64)
    base = n ** (2.0 / (2.0 + a + d))
    ratio = mu * n ** (a / (2.0 + a + d))
    j = slice_index(ratio)
    jj = np.clip(j, 0, 4096).astype(np.float64)
    shrink = 2.0 ** (-2.0 * jj / (2.0 + d))
    if schedule.variant == "sliced_theoretical":
        k0 = float(_floor(base * math.log(n)))
        k = np.where(j < 0, k0, _floor(k0 * shrink))
    else:
        k = np.where(j < 0, _floor(base) + 1, _floor(base * shrink) + 1)
    return np.clip(k, 1, n).astype(np.int64)


def choose_k(schedule: KSchedule, n: int, d: int, x=None, density=None) -> int:
    """Number of neighbors for one query point (``x`` only matters for sliced)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = schedule.variant
    if v == "fixed":
        k = schedule.k
    elif v == "compact":
        k = int(_floor(n ** (2.0 / (2.0 + d))))
    elif v == "general":
        k = int(_floor(n ** (2.0 / (3.0 + schedule.alpha + d)))) + (1 if schedule.plus_one else 0)
    else:
        if density is None or x is None:
            raise MissingDensity(f"{schedule.name} needs a query point and a density source")
        mu = float(np.asarray(density(x)).reshape(-1)[0])
        return int(_sliced_k(schedule, n, d, mu))
    return int(min(max(k, 1), n))


def choose_k_batch(schedule: KSchedule, n: int, d: int, mu=None, size: int | None = None) -> np.ndarray:
    """Vectorised ``choose_k``; sliced schedules take density values ``mu``."""
    if schedule.is_sliced:
        if mu is None:
            raise MissingDensity(f"{schedule.name} needs density values")
        return _sliced_k(schedule, n, d, mu)
    k = choose_k(schedule, n, d)
    m = size if size is not None else (np.size(mu) if mu is not None else 1)
    return np.full(m, k, dtype=np.int64)


def classify_knn(index, x, schedule: KSchedule, density=None) -> int:
    data = index.data
    k = choose_k(schedule, data.n, data.dim, x, density)
    nbrs = index.k_nearest(x, min(k, data.n))
    return classify_vote(eta_hat(nbrs.labels))


def predict(index, queries, schedule: KSchedule, density=None) -> np.ndarray:
    """Labels for a batch of queries (rows of ``queries``)."""
    data = index.data
    Q = np.asarray(queries, dtype=np.float64).reshape(-1, data.dim)
    mu = None
    if schedule.is_sliced:
        if density is None:
            raise MissingDensity(f"{schedule.name} needs a density source")
        mu = np.asarray(density(Q if data.dim > 1 else Q[:, 0]), dtype=np.float64).reshape(-1)
    ks = choose_k_batch(schedule, data.n, data.dim, mu, size=Q.shape[0])
    return (index.label_means(Q, ks) > 0.5).astype(np.int64)


def aggregate_sda(sample0, sample1) -> Dataset:
    """Pool two unlabeled samples, labelling the first 0 and the second 1."""
    X0 = sample0.X if isinstance(sample0, Dataset) else np.asarray(sample0, dtype=np.float64)
    X1 = sample1.X if isinstance(sample1, Dataset) else np.asarray(sample1, dtype=np.float64)
    if X0.size == 0 or X1.size == 0:
        raise EmptyNeighborhood("both samples must be non-empty")
    X0 = X0.reshape(X0.shape[0], -1) if X0.ndim else X0.reshape(1, 1)
    X1 = X1.reshape(X1.shape[0], -1) if X1.ndim else X1.reshape(1, 1)
    if X0.shape[1] != X1.shape[1]:
        raise DimMismatch(f"samples have dims {X0.shape[1]} and {X1.shape[1]}")
    y = np.concatenate([np.zeros(X0.shape[0], np.int64), np.ones(X1.shape[0], np.int64)])
    return Dataset(np.vstack([X0, X1]), y, dim=X0.shape[1])


def classify_sda(sample0, sample1, x, k: int, backend: str = "brute") -> int:
    pooled = aggregate_sda(sample0, sample1)
    return classify_knn(build_index(pooled, backend), x, KSchedule.fixed(min(k, pooled.n)))
