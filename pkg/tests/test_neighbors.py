import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import knn_sort, nn_scan
from pcrd.neighbors import NeighborIndex, build, nearest, nearest_k
from pcrd.pointcloud import PointCloud


def test_single_point():
    idx = NeighborIndex([[1.0, 2.0, 3.0]])
    assert len(idx) == 1
    assert nearest(idx, [0, 0, 0]) == (0, 14.0)


def test_empty_rejected():
    with pytest.raises(ValueError):
        NeighborIndex(np.empty((0, 3)))


def test_forced_geometry():
    idx = NeighborIndex([[1, 0, 0], [0, 2, 0]])
    assert nearest(idx, [0, 0, 0]) == (0, 1.0)


def test_self_query(rng):
    pts = rng.uniform(0, 100, (1000, 3))
    i, d = NeighborIndex(pts).query(pts)
    assert np.array_equal(i, np.arange(1000)) and not d.any()


def test_duplicates_keep_multiset_and_smallest_index():
    pts = np.array([[1, 1, 1]] * 40 + [[0, 0, 0]] * 3, dtype=float)
    idx = NeighborIndex(pts)
    assert len(idx) == 43
    assert nearest(idx, [1, 1, 1.2])[0] == 0
    assert nearest(idx, [0, 0, -1])[0] == 40


def test_against_linear_scan(rng):
    pts = rng.uniform(-1, 1, (500, 3))
    q = rng.uniform(-1.2, 1.2, (500, 3))
    i, d = NeighborIndex(pts).query(q)
    oi, od = nn_scan(q, pts)
    assert np.array_equal(i, oi) and np.array_equal(d, od)


def test_ties_on_integer_grid(rng):
    # coarse integer lattice: many equidistant candidates
    pts = rng.integers(0, 6, (2000, 3)).astype(float)
    q = rng.integers(0, 6, (800, 3)) + rng.choice([0.0, 0.5], (800, 3))
    i, d = NeighborIndex(pts).query(q)
    oi, od = nn_scan(q, pts)
    assert np.array_equal(i, oi) and np.array_equal(d, od)


@settings(max_examples=40)
@given(arrays(np.int64, st.tuples(st.integers(1, 200), st.just(3)), elements=st.integers(-4, 4)),
       arrays(np.int64, st.tuples(st.integers(1, 20), st.just(3)), elements=st.integers(-5, 5)))
def test_oracle_property(pts, q):
    i, d = NeighborIndex(pts.astype(float)).query(q.astype(float))
    oi, od = nn_scan(q, pts)
    assert np.array_equal(i, oi) and np.array_equal(d, od)


def test_knn_against_sort(rng):
    pts = rng.integers(0, 8, (300, 3)).astype(float)
    idx = NeighborIndex(pts)
    for q in rng.uniform(-1, 9, (50, 3)):
        for k in (1, 5, 17):
            assert nearest_k(idx, q, k) == knn_sort(pts, q, k)


def test_knn_all_points_and_k1(rng):
    pts = rng.uniform(0, 1, (40, 3))
    idx = NeighborIndex(pts)
    q = rng.uniform(0, 1, 3)
    assert nearest_k(idx, q, 40) == knn_sort(pts, q, 40)
    assert nearest_k(idx, q, 1)[0] == nearest(idx, q)
    with pytest.raises(ValueError):
        nearest_k(idx, q, 41)
    with pytest.raises(ValueError):
        nearest_k(idx, q, 0)


def test_permutation_keeps_distances(rng):
    pts = rng.uniform(0, 10, (300, 3))
    q = rng.uniform(0, 10, (100, 3))
    perm = rng.permutation(300)
    _, d1 = NeighborIndex(pts).query(q)
    i2, d2 = NeighborIndex(pts[perm]).query(q)
    assert np.array_equal(d1, d2)


def test_build_is_cached_per_cloud():
    c = PointCloud(np.eye(3), np.zeros((3, 3)))
    assert build(c) is build(c)
