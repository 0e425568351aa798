"""Domain types, dataset container and the stream-splitting RNG contract.

Randomness: every replication draws from its own ``numpy`` PCG64 generator
seeded by ``SeedSequence(entropy=seed, spawn_key=(stream_id,))``.  The
SeedSequence hash makes streams for different ids look independent, and
because a stream is a pure function of ``(seed, stream_id)`` replications can
run in any order or in parallel with bit-identical results.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BadLabel, EmptyDataset, MixedDimensions

_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class LabeledPoint:
    x: tuple[float, ...]
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise BadLabel(f"label must be 0 or 1, got {self.y!r}")
        if not all(math.isfinite(v) for v in self.x):
            raise ValueError("coordinates must be finite")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable training sample.

    ``X`` has shape ``(n, dim)`` and ``y`` holds integer labels in {0, 1}.
    Both arrays are read-only views, so a dataset can be shared between
    worker threads without copying.
    """

    X: np.ndarray
    y: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.dim in (0, 1) else X.reshape(-1, self.dim)
        y = np.array(self.y, dtype=np.int64, copy=True).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise MixedDimensions("X and y disagree in length")
        dim = X.shape[1] if X.shape[0] else max(self.dim, 1)
        if self.dim and X.shape[0] and self.dim != X.shape[1]:
            raise MixedDimensions(f"declared dim {self.dim} but points have {X.shape[1]}")
        if dim < 1:
            raise MixedDimensions("dim must be at least 1")
        if y.size and not np.isin(y, (0, 1)).all():
            raise BadLabel("labels must be 0 or 1")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dim", int(dim))

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[LabeledPoint]:
        for row, label in zip(self.X, self.y):
            yield LabeledPoint(tuple(float(v) for v in row), int(label))

    @property
    def points(self) -> list[LabeledPoint]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    def require_nonempty(self) -> "Dataset":
        if self.n == 0:
            raise EmptyDataset("dataset has no points")
        return self

    def to_csv(self, path: str | Path | None = None) -> str:
        """Serialise with header ``x1,...,xd,y`` and 17 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(self.dim)] + ["y"])
        for row, label in zip(self.X, self.y):
            writer.writerow([format(float(v), ".17g") for v in row] + [int(label)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "Dataset":
        """Parse CSV text, or a path to a CSV file."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        else:
            text = source
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        dim = len(header) - 1
        if dim < 1 or header[-1] != "y":
            raise MixedDimensions(f"bad header {header!r}")
        X = np.array([[float(v) for v in r[:-1]] for r in body], dtype=np.float64).reshape(-1, dim)
        y = [int(r[-1]) for r in body]
        return cls(X, np.array(y, dtype=np.int64), dim=dim)


def make_dataset(points: Iterable[tuple[Sequence[float], int]]) -> Dataset:
    """Build a dataset from ``(vector, label)`` pairs, keeping insertion order."""
    xs, ys = [], []
    dim = None
    for vec, label in points:
        vec = np.atleast_1d(np.asarray(vec, dtype=np.float64))
        if vec.ndim != 1 or vec.size < 1:
            raise MixedDimensions("each point must be a non-empty vector")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise MixedDimensions(f"point of length {vec.size} in a dataset of dim {dim}")
        if label not in (0, 1) or isinstance(label, bool):
            raise BadLabel(f"label must be 0 or 1, got {label!r}")
        xs.append(vec)
        ys.append(int(label))
    if dim is None:
        return Dataset(np.empty((0, 1)), np.empty(0, dtype=np.int64), dim=1)
    return Dataset(np.vstack(xs), np.array(ys, dtype=np.int64), dim=dim)


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _UINT64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _UINT64)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, tag: int) -> "RngStream":
        # mixes the tag into the id; used for auxiliary draws inside one replication
        return RngStream(self.seed, (self.stream_id * 0x9E3779B97F4A7C15 + tag + 1) & _UINT64)


def derive_stream(seed: int, replication_index: int) -> RngStream:
    return RngStream(seed, replication_index)


def as_generator(stream) -> np.random.Generator:
    """Accept an ``RngStream``, a ``Generator`` or an int seed."""
    if isinstance(stream, RngStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    return np.random.default_rng(stream)
