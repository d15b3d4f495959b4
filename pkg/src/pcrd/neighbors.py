"""Exact nearest-neighbor search over point positions.

The k-d tree splits each node at the median of its widest-spread axis and
stops at leaves of at most ``LEAF_SIZE`` points. Distances are squared
Euclidean, and ties always go to the smallest original point index, so every
metric built on top is deterministic.
"""

from __future__ import annotations

import numba
import numpy as np

LEAF_SIZE = 16
_STACK_SIZE = 256


class NeighborIndex:
    """Immutable k-d tree over an ``(N, 3)`` array of positions."""

    def __init__(self, positions, leaf_size: int = LEAF_SIZE):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError(f"positions must be (N, 3), got {positions.shape}")
        if len(positions) == 0:
            raise ValueError("cannot build a neighbor index over an empty cloud")
        positions = positions.copy()
        positions.setflags(write=False)
        self.positions = positions
        self.leaf_size = leaf_size
        self._build()

    def __len__(self) -> int:
        return self.positions.shape[0]

    def _build(self):
        n = len(self.positions)
        perm = np.arange(n, dtype=np.int64)
        starts, ends, dims, splits, lefts, rights = [], [], [], [], [], []

        def new_node(lo, hi):
            starts.append(lo)
            ends.append(hi)
            dims.append(-1)
            splits.append(0.0)
            lefts.append(-1)
            rights.append(-1)
            return len(starts) - 1

        root = new_node(0, n)
        work = [root]
        while work:
            node = work.pop()
            lo, hi = starts[node], ends[node]
            if hi - lo <= self.leaf_size:
                continue
            idx = perm[lo:hi]
            pts = self.positions[idx]
            spread = pts.max(axis=0) - pts.min(axis=0)
            dim = int(np.argmax(spread))
            if spread[dim] == 0.0:
                # all coincident: keep as an oversized leaf
                continue
            order = np.lexsort((idx, pts[:, dim]))
            perm[lo:hi] = idx[order]
            mid = lo + (hi - lo) // 2
            dims[node] = dim
            splits[node] = self.positions[perm[mid], dim]
            lefts[node] = new_node(lo, mid)
            rights[node] = new_node(mid, hi)
            work.append(rights[node])
            work.append(lefts[node])

        self._perm = perm
        self._start = np.array(starts, dtype=np.int64)
        self._end = np.array(ends, dtype=np.int64)
        self._dim = np.array(dims, dtype=np.int64)
        self._split = np.array(splits, dtype=np.float64)
        self._left = np.array(lefts, dtype=np.int64)
        self._right = np.array(rights, dtype=np.int64)

    def _tree(self):
        return (self.positions, self._perm, self._start, self._end,
                self._dim, self._split, self._left, self._right)

    def query(self, queries):
        """Nearest neighbor of every row of ``queries``.

        Returns ``(indices, squared_distances)`` arrays.
        """
        queries = _as_queries(queries)
        idx = np.empty(len(queries), dtype=np.int64)
        dist = np.empty(len(queries), dtype=np.float64)
        _query_nearest(*self._tree(), queries, idx, dist)
        return idx, dist

    def query_k(self, queries, k: int):
        """The ``k`` nearest neighbors of every query, ascending by (distance, index)."""
        if not 1 <= k <= len(self):
            raise ValueError(f"k must be in [1, {len(self)}], got {k}")
        queries = _as_queries(queries)
        idx = np.empty((len(queries), k), dtype=np.int64)
        dist = np.empty((len(queries), k), dtype=np.float64)
        _query_knn(*self._tree(), queries, idx, dist)
        return idx, dist


def build(cloud) -> NeighborIndex:
    """Build (or fetch the cached) index over a cloud's positions."""
    cache = getattr(cloud, "_cache", None)
    if cache is not None and "index" in cache:
        return cache["index"]
    index = NeighborIndex(cloud.positions)
    if cache is not None:
        cache["index"] = index
    return index


def nearest(index: NeighborIndex, query) -> tuple[int, float]:
    idx, dist = index.query(np.asarray(query, dtype=np.float64).reshape(1, 3))
    return int(idx[0]), float(dist[0])


def nearest_k(index: NeighborIndex, query, k: int) -> list[tuple[int, float]]:
    idx, dist = index.query_k(np.asarray(query, dtype=np.float64).reshape(1, 3), k)
    return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]


def _as_queries(queries):
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries.reshape(1, -1)
    if queries.shape[1] != 3:
        raise ValueError(f"queries must be (M, 3), got {queries.shape}")
    return queries


@numba.njit(cache=True, inline="always")
def _sqdist(positions, i, qx, qy, qz):
    dx = qx - positions[i, 0]
    dy = qy - positions[i, 1]
    dz = qz - positions[i, 2]
    return dx * dx + dy * dy + dz * dz


@numba.njit(cache=True)
def _query_nearest(positions, perm, start, end, dim, split, left, right, queries, out_idx, out_dist):
    node_stack = np.empty(_STACK_SIZE, dtype=np.int64)
    bound_stack = np.empty(_STACK_SIZE, dtype=np.float64)
    q = np.empty(3)
    for m in range(queries.shape[0]):
        q[0] = queries[m, 0]
        q[1] = queries[m, 1]
        q[2] = queries[m, 2]
        best = np.inf
        best_i = -1
        top = 0
        node_stack[0] = 0
        bound_stack[0] = 0.0
        top = 1
        while top > 0:
            top -= 1
            node = node_stack[top]
            # `<=` keeps equal-distance subtrees so index tie-breaks stay exact
            if bound_stack[top] > best:
                continue
            if left[node] < 0:
                for t in range(start[node], end[node]):
                    i = perm[t]
                    d = _sqdist(positions, i, q[0], q[1], q[2])
                    if d < best or (d == best and i < best_i):
                        best = d
                        best_i = i
                continue
            diff = q[dim[node]] - split[node]
            if diff < 0.0:
                near, far = left[node], right[node]
            else:
                near, far = right[node], left[node]
            node_stack[top] = far
            bound_stack[top] = diff * diff
            node_stack[top + 1] = near
            bound_stack[top + 1] = 0.0
            top += 2
        out_idx[m] = best_i
        out_dist[m] = best


@numba.njit(cache=True)
def _query_knn(positions, perm, start, end, dim, split, left, right, queries, out_idx, out_dist):
    k = out_idx.shape[1]
    node_stack = np.empty(_STACK_SIZE, dtype=np.int64)
    bound_stack = np.empty(_STACK_SIZE, dtype=np.float64)
    best_d = np.empty(k)
    best_i = np.empty(k, dtype=np.int64)
    q = np.empty(3)
    for m in range(queries.shape[0]):
        q[0] = queries[m, 0]
        q[1] = queries[m, 1]
        q[2] = queries[m, 2]
        best_d[:] = np.inf
        best_i[:] = -1
        node_stack[0] = 0
        bound_stack[0] = 0.0
        top = 1
        while top > 0:
            top -= 1
            node = node_stack[top]
            if bound_stack[top] > best_d[k - 1]:
                continue
            if left[node] < 0:
                for t in range(start[node], end[node]):
                    i = perm[t]
                    d = _sqdist(positions, i, q[0], q[1], q[2])
                    worst_d = best_d[k - 1]
                    if d < worst_d or (d == worst_d and (best_i[k - 1] < 0 or i < best_i[k - 1])):
                        # insertion into the (distance, index)-sorted buffer
                        j = k - 1
                        while j > 0 and (best_d[j - 1] > d or (best_d[j - 1] == d and best_i[j - 1] > i)):
                            best_d[j] = best_d[j - 1]
                            best_i[j] = best_i[j - 1]
                            j -= 1
                        best_d[j] = d
                        best_i[j] = i
                continue
            diff = q[dim[node]] - split[node]
            if diff < 0.0:
                near, far = left[node], right[node]
            else:
                near, far = right[node], left[node]
            node_stack[top] = far
            bound_stack[top] = diff * diff
            node_stack[top + 1] = near
            bound_stack[top + 1] = 0.0
            top += 2
        for j in range(k):
            out_idx[m, j] = best_i[j]
            out_dist[m, j] = best_d[j]
