"""Gaussian kernel density estimate used as the preliminary density for the
sliced rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateSample


def silverman_bandwidth(X: np.ndarray) -> float:
    """Rule-of-thumb bandwidth ``s * (4 / ((d + 2) n)) ** (1 / (d + 4))``.

    ``s`` averages the per-coordinate robust scale ``min(sd, IQR/1.349)``
    (plain ``sd`` where the IQR collapses).  The robust scale keeps heavy
    tailed samples (Cauchy, power laws) from blowing the bandwidth up.
    """
    X = np.asarray(X, dtype=np.float64)
    X = X.reshape(X.shape[0], -1)
    n, d = X.shape
    if n < 2:
        raise DegenerateSample("Silverman bandwidth needs at least two points")
    sd = X.std(axis=0, ddof=1)
    q75, q25 = np.percentile(X, [75, 25], axis=0)
    iqr = (q75 - q25) / 1.349
    scale = np.where(iqr > 0, np.minimum(sd, iqr), sd)
    s = float(scale.mean())
    if not s > 0:
        raise DegenerateSample("sample has zero spread")
    return s * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


@dataclass(frozen=True, eq=False)
class KdeModel:
    sample: np.ndarray
    bandwidth: float

    @property
    def dim(self) -> int:
        return self.sample.shape[1]

    def __call__(self, x):
        return kde_eval(self, x)


def kde_fit(features, bandwidth="silverman") -> KdeModel:
    X = np.asarray(features, dtype=np.float64)
    X = X.reshape(X.shape[0], -1) if X.ndim else X.reshape(1, 1)
    if X.shape[0] == 0:
        raise DegenerateSample("empty sample")
    if bandwidth == "silverman":
        h = silverman_bandwidth(X)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError("fixed bandwidth must be positive")
    X = X.copy()
    X.flags.writeable = False
    return KdeModel(X, h)


def kde_eval(model: KdeModel, x, chunk: int = 512):
    """Estimated density at one point or at each row of ``x``."""
    d = model.dim
    scalar = np.ndim(x) == 0 or (np.ndim(x) == 1 and d > 1 and np.size(x) == d)
    Q = np.asarray(x, dtype=np.float64).reshape(-1, d)
    h = model.bandwidth
    norm = (2.0 * math.pi) ** (-d / 2) / (h ** d * model.sample.shape[0])
    out = np.empty(Q.shape[0])
    for s in range(0, Q.shape[0], chunk):
        diff = (Q[s:s + chunk, None, :] - model.sample[None, :, :]) / h
        sq = np.einsum("mnj,mnj->mn", diff, diff)
        out[s:s + chunk] = np.exp(-0.5 * sq).sum(axis=1) * norm
    return float(out[0]) if scalar else out
