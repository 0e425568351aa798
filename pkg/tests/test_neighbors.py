import numpy as np
import pytest
from hypothesis import given, strategies as st

from knn_minimax.core import Dataset
from knn_minimax.errors import DimMismatch, EmptyDataset, KTooLarge
from knn_minimax.neighbors import BruteIndex, KDTreeIndex, build_index, k_nearest


def _data(X, y=None):
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    y = np.arange(len(X)) % 2 if y is None else y
    return Dataset(X, y, dim=X.shape[1])


def test_small_example():
    idx = build_index(_data([0.0, 1.0, 3.0]), "brute")
    nb = k_nearest(idx, [0.9], 2)
    assert nb.indices == [1, 0]
    assert nb.distances == pytest.approx([0.1, 0.9])


@pytest.mark.parametrize("backend", ["brute", "tree"])
def test_empty_dataset(backend):
    with pytest.raises(EmptyDataset):
        build_index(Dataset(np.empty((0, 1)), np.empty(0, dtype=int)), backend)


def test_unknown_backend():
    with pytest.raises(ValueError):
        build_index(_data([0.0]), "ball")


@pytest.mark.parametrize("backend", ["brute", "tree"])
def test_errors(backend):
    idx = build_index(_data([[0.0, 1.0], [1.0, 1.0]]), backend)
    with pytest.raises(KTooLarge):
        k_nearest(idx, [0.0, 0.0], 3)
    with pytest.raises(DimMismatch):
        k_nearest(idx, [0.0], 1)


def test_k_equals_n_is_total_order():
    X = np.array([2.0, -1.0, 1.0, 0.0, -2.0])
    nb = k_nearest(build_index(_data(X)), [0.0], 5)
    assert nb.indices == [3, 1, 2, 0, 4]  # ties at distance 1 and 2 go by index


def test_uniform_cube_tree_matches_brute(rng):
    data = _data(rng.random((200, 3)))
    brute, tree = build_index(data, "brute"), build_index(data, "tree")
    for q in rng.random((50, 3)):
        assert tree.k_nearest(q, 7) == brute.k_nearest(q, 7)


def test_tree_handles_duplicate_points():
    X = np.repeat(np.arange(5.0), 20).reshape(-1, 1)
    data = _data(X)
    brute, tree = BruteIndex(data), KDTreeIndex(data, leaf_size=3)
    for q in [-0.5, 0.0, 2.0, 2.5, 7.0]:
        assert tree.k_nearest([q], 37) == brute.k_nearest([q], 37)


def test_self_query_first():
    data = _data(np.random.default_rng(1).normal(size=(50, 2)))
    for backend in ("brute", "tree"):
        nb = build_index(data, backend).k_nearest(data.X[17], 3)
        assert nb[0].index == 17 and nb[0].distance == 0.0


grids = st.integers(1, 5).flatmap(lambda d: st.tuples(
    st.just(d),
    st.lists(st.lists(st.integers(-3, 3), min_size=d, max_size=d), min_size=1, max_size=40),
    st.lists(st.integers(-4, 4), min_size=d, max_size=d),
))


@given(grids, st.integers(1, 40), st.integers(1, 8))
def test_tree_equals_brute_on_integer_grids(case, k, leaf):
    # integer coordinates create many exact ties
    d, pts, q = case
    data = _data(np.array(pts, dtype=float))
    k = min(k, data.n)
    assert KDTreeIndex(data, leaf).k_nearest(q, k) == BruteIndex(data).k_nearest(q, k)


@given(grids, st.integers(1, 39))
def test_prefix_property(case, k):
    d, pts, q = case
    data = _data(np.array(pts, dtype=float))
    k = min(k, data.n - 1)
    if k < 1:
        return
    idx = BruteIndex(data)
    assert idx.k_nearest(q, k + 1)[:k] == idx.k_nearest(q, k)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_label_means_match_explicit_votes(d, rng):
    X = rng.integers(0, 4, size=(120, d)).astype(float) if d > 1 else rng.normal(size=(120, 1))
    data = _data(X, rng.integers(0, 2, 120))
    Q = rng.integers(0, 4, size=(60, d)).astype(float) if d > 1 else rng.normal(size=(60, 1))
    ks = rng.integers(1, 121, size=60)
    idx = build_index(data)
    expected = [np.mean(idx.k_nearest(q, int(k)).labels) for q, k in zip(Q, ks)]
    assert np.array_equal(idx.label_means(Q, ks), expected)
    assert np.array_equal(build_index(data, "tree").label_means(Q, ks), expected)


def test_label_means_1d_ties():
    X = np.repeat([0.0, 1.0, 2.0], 5)
    data = _data(X, np.tile([1, 0, 1, 0, 0], 3))
    idx = build_index(data)
    Q = np.array([[0.5], [1.0], [1.5], [-3.0]])
    for k in range(1, 16):
        expected = [np.mean(idx.k_nearest(q, k).labels) for q in Q]
        assert np.array_equal(idx.label_means(Q, k), expected)


def test_queries_do_not_mutate_data():
    data = _data(np.random.default_rng(2).normal(size=(30, 2)))
    before = data.X.copy()
    idx = build_index(data, "tree")
    idx.k_nearest([0.0, 0.0], 10)
    assert np.array_equal(data.X, before)
