"""Exact k-nearest-neighbor retrieval under the Euclidean distance.

Two backends answer the same queries: a flat brute-force scan (the oracle)
and a kd-tree that splits on the widest-spread coordinate at the median.
Both order neighbors by ``(distance, original index)`` so results agree
exactly, ties included.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Dataset
from .errors import DimMismatch, EmptyDataset, KTooLarge

LEAF_SIZE = 16


def euclidean(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Distances from each row of ``points`` to ``query``.

    Every backend goes through this function so that tied distances are
    bit-identical across backends.
    """
    diff = points - query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


class Neighbor(NamedTuple):
    index: int
    distance: float
    label: int


class NeighborList(tuple):
    """Neighbors sorted by (distance, original index)."""

    @property
    def indices(self) -> list[int]:
        return [nb.index for nb in self]

    @property
    def distances(self) -> list[float]:
        return [nb.distance for nb in self]

    @property
    def labels(self) -> list[int]:
        return [nb.label for nb in self]


def _check_query(data: Dataset, query, k: int) -> np.ndarray:
    q = np.atleast_1d(np.asarray(query, dtype=np.float64))
    if q.ndim != 1 or q.size != data.dim:
        raise DimMismatch(f"query of length {q.size} against dim {data.dim}")
    if k < 1:
        raise ValueError("k must be positive")
    if k > data.n:
        raise KTooLarge(f"k={k} exceeds n={data.n}")
    return q


class BruteIndex:
    backend = "brute"

    def __init__(self, data: Dataset):
        self.data = data.require_nonempty()
        self._view = None

    def k_nearest(self, query, k: int) -> NeighborList:
        q = _check_query(self.data, query, k)
        dist = euclidean(self.data.X, q)
        # stable sort keeps ascending index among equal distances
        order = np.argsort(dist, kind="stable")[:k]
        y = self.data.y
        return NeighborList(Neighbor(int(i), float(dist[i]), int(y[i])) for i in order)

    def label_means(self, queries, ks) -> np.ndarray:
        """Mean neighbor label per query; ``ks`` is a scalar or one k per query."""
        if self.data.dim == 1 and self._view is None:
            self._view = _sorted_view(self.data)
        return _batch_label_means(self.data, queries, ks, view=self._view)


@dataclass
class _Node:
    lo: int
    hi: int
    dim: int = -1
    split: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None


class KDTreeIndex:
    backend = "tree"

    def __init__(self, data: Dataset, leaf_size: int = LEAF_SIZE):
        self.data = data.require_nonempty()
        self.leaf_size = max(1, int(leaf_size))
        self.perm = np.arange(data.n)
        self.root = self._build(0, data.n)

    def _build(self, lo: int, hi: int) -> _Node:
        node = _Node(lo, hi)
        if hi - lo <= self.leaf_size:
            return node
        idx = self.perm[lo:hi]
        pts = self.data.X[idx]
        spread = pts.max(axis=0) - pts.min(axis=0)
        dim = int(np.argmax(spread))
        if spread[dim] == 0.0:
            return node
        mid = (hi - lo) // 2
        part = np.argpartition(pts[:, dim], mid, kind="introselect")
        self.perm[lo:hi] = idx[part]
        node.dim = dim
        node.split = float(self.data.X[self.perm[lo + mid], dim])
        node.left = self._build(lo, lo + mid)
        node.right = self._build(lo + mid, hi)
        return node

    def k_nearest(self, query, k: int) -> NeighborList:
        q = _check_query(self.data, query, k)
        X, y = self.data.X, self.data.y
        heap: list[tuple[float, int]] = []  # entries (-dist, -index): max-heap on (dist, index)

        def worst() -> tuple[float, int]:
            d, i = heap[0]
            return -d, -i

        def visit(node: _Node):
            if node.left is None:
                idx = self.perm[node.lo:node.hi]
                dist = euclidean(X[idx], q)
                for i, d in zip(idx.tolist(), dist.tolist()):
                    if len(heap) < k:
                        heapq.heappush(heap, (-d, -i))
                    elif (d, i) < worst():
                        heapq.heapreplace(heap, (-d, -i))
                return
            gap = q[node.dim] - node.split
            near, far = (node.left, node.right) if gap <= 0 else (node.right, node.left)
            visit(near)
            # equality must be explored: a tied point with a smaller index may lie beyond
            if len(heap) < k or abs(gap) <= worst()[0]:
                visit(far)

        visit(self.root)
        found = sorted((-d, -i) for d, i in heap)
        return NeighborList(Neighbor(i, d, int(y[i])) for d, i in found)

    def label_means(self, queries, ks) -> np.ndarray:
        Q = np.asarray(queries, dtype=np.float64).reshape(-1, self.data.dim)
        ks = np.broadcast_to(np.asarray(ks, dtype=np.int64), (Q.shape[0],))
        return np.array([np.mean(self.k_nearest(q, int(k)).labels) for q, k in zip(Q, ks)])


def build_index(data: Dataset, backend: str = "brute"):
    if data.n == 0:
        raise EmptyDataset("cannot index an empty dataset")
    if backend == "brute":
        return BruteIndex(data)
    if backend == "tree":
        return KDTreeIndex(data)
    raise ValueError(f"unknown backend {backend!r}")


def k_nearest(index, query, k: int) -> NeighborList:
    return index.k_nearest(query, k)


def _batch_label_means(data: Dataset, queries, ks, chunk: int = 256, view=None) -> np.ndarray:
    """Mean label of the k nearest neighbors for many queries at once.

    Same selection as ``BruteIndex.k_nearest`` (ties broken by ascending
    index), but vectorised: only the neighbor set matters, not its order.
    ``ks`` is a scalar or one k per query.
    """
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q.reshape(-1, data.dim) if data.dim > 1 else Q.reshape(-1, 1)
    if Q.shape[1] != data.dim:
        raise DimMismatch(f"queries have dim {Q.shape[1]}, index has {data.dim}")
    ks = np.broadcast_to(np.asarray(ks, dtype=np.int64), (Q.shape[0],))
    if Q.shape[0] == 0:
        return np.empty(0)
    if ks.min() < 1:
        raise ValueError("k must be positive")
    if ks.max() > data.n:
        raise KTooLarge(f"k={int(ks.max())} exceeds n={data.n}")
    out = np.empty(Q.shape[0])
    for k in np.unique(ks):
        rows = np.flatnonzero(ks == k)
        if data.dim == 1:
            if view is None:
                view = _sorted_view(data)
            out[rows] = _window_means_1d(data, Q[rows, 0], int(k), view)
        else:
            for s in range(0, rows.size, chunk):
                r = rows[s:s + chunk]
                out[r] = _partition_means(data, Q[r], int(k))
    return out


def _partition_means(data: Dataset, Q: np.ndarray, k: int) -> np.ndarray:
    diff = Q[:, None, :] - data.X[None, :, :]
    D = np.sqrt(np.einsum("mnj,mnj->mn", diff, diff))
    return _select_sum(D, data.y[None, :], k) / k


def _select_sum(D: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Label sums over the k smallest entries per row, ties by column order."""
    kth = np.partition(D, k - 1, axis=1)[:, k - 1:k]
    below = D < kth
    room = k - below.sum(axis=1, keepdims=True)
    at = D == kth
    take = at & (np.cumsum(at, axis=1) <= room)
    labels = np.broadcast_to(labels, D.shape)
    return (labels * (below | take)).sum(axis=1)


def _sorted_view(data: Dataset):
    order = np.argsort(data.X[:, 0], kind="stable")
    return data.X[order, 0], data.y[order]


def _window_means_1d(data: Dataset, q: np.ndarray, k: int, view=None) -> np.ndarray:
    # In 1-d the k nearest form a contiguous run of the sorted sample that
    # contains position pos-1 or pos, so a window of 2k around pos suffices.
    n = data.n
    xs, ys = view if view is not None else _sorted_view(data)
    pos = np.searchsorted(xs, q)
    w = min(2 * k, n)
    lo = np.clip(pos - k, 0, n - w)
    idx = lo[:, None] + np.arange(w)[None, :]
    D = np.abs(xs[idx] - q[:, None])
    kth = np.partition(D, k - 1, axis=1)[:, k - 1:k]
    sel = D <= kth
    sums = (ys[idx] * sel).sum(axis=1).astype(np.float64)
    # rows with a tie at the k-th distance, or a tie that may continue past
    # the window edge, need the index-ordered rule; fall back to a full scan
    ambiguous = sel.sum(axis=1) != k
    ambiguous |= (lo > 0) & (D[:, 0] <= kth[:, 0])
    ambiguous |= (lo + w < n) & (D[:, -1] <= kth[:, 0])
    bad = np.flatnonzero(ambiguous)
    if bad.size:
        full = np.abs(data.X[None, :, 0] - q[bad, None])
        sums[bad] = _select_sum(full, data.y[None, :], k)
    return sums / k
