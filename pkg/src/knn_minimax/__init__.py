"""Nearest-neighbor classification under margin and tail conditions: rules,
k schedules, synthetic models, assumption checkers and Monte Carlo harness."""

from .core import Dataset, LabeledPoint, RngStream, derive_stream, make_dataset
from .errors import KnnMinimaxError
from .neighbors import build_index, k_nearest
from .rules import (
    DensitySource, KSchedule, choose_k, classify_knn, classify_sda, classify_vote, eta_hat,
    parse_schedule, predict,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "LabeledPoint", "RngStream", "derive_stream", "make_dataset", "KnnMinimaxError",
    "build_index", "k_nearest", "DensitySource", "KSchedule", "choose_k", "classify_knn",
    "classify_sda", "classify_vote", "eta_hat", "parse_schedule", "predict",
]
