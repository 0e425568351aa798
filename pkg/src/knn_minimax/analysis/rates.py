"""Log-log slope fitting for empirical convergence rates."""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import NonPositiveInput


def fit_rate(points) -> dict:
    """OLS of ln(excess) on ln(n) for pairs ``(n, excess)``."""
    arr = np.asarray(list(points), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("fit_rate needs at least three (n, excess) pairs")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise NonPositiveInput("n and excess must all be positive and finite")
    res = stats.linregress(np.log(arr[:, 0]), np.log(arr[:, 1]))
    return {"slope": float(res.slope), "intercept": float(res.intercept), "r2": float(res.rvalue ** 2)}
