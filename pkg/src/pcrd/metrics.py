"""Geometry, color and unified distortion between two point clouds.

Every one-sided measure pools squared errors over the *test* cloud, each test
point paired with its nearest reference point. Bidirectional measures take
the max of the two directions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .neighbors import NeighborIndex, build
from .pointcloud import PointCloud, attribute_pairs

PSNR_PEAK = 2.0
DEFAULT_NORMALS_K = 12
COV_REGULARIZATION = 1e-9

_LUMA_WEIGHTS = np.array([6.0, 1.0, 1.0]) / 8.0


def _mean(values) -> float:
    # exactly rounded sum: independent of point order
    values = np.asarray(values, dtype=np.float64)
    return math.fsum(values.tolist()) / len(values)


def _check_nonempty(*clouds):
    for c in clouds:
        if len(c) == 0:
            raise ValueError("metrics need non-empty point clouds")


def one_sided_point_to_point(test: PointCloud, ref_index: NeighborIndex) -> float:
    """Mean squared distance from each test point to its nearest reference point."""
    _check_nonempty(test)
    _, sq = ref_index.query(test.positions)
    return _mean(sq)


def point_to_point(a: PointCloud, b: PointCloud) -> float:
    _check_nonempty(a, b)
    return max(one_sided_point_to_point(a, build(b)), one_sided_point_to_point(b, build(a)))


def estimate_normals(cloud: PointCloud, k: int = DEFAULT_NORMALS_K) -> np.ndarray:
    """Unit normals from a PCA plane fit over each point's ``k`` nearest neighbors.

    The normal is the eigenvector of the smallest eigenvalue of the neighbor
    position covariance, signed so its largest-magnitude component is
    positive. A neighborhood of identical points gets ``(0, 0, 1)``.
    """
    n = len(cloud)
    if not 3 <= k <= n:
        raise ValueError(f"k must be in [3, {n}] for a cloud of {n} points, got {k}")
    return _pca_normals(cloud, k)


def _pca_normals(cloud, k):
    # no lower bound on k: tiny decoded clouds still need some normal
    n = len(cloud)
    idx, _ = build(cloud).query_k(cloud.positions, k)
    nbrs = cloud.positions[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    rows = np.arange(n)
    flip = normals[rows, np.argmax(np.abs(normals), axis=1)] < 0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    degenerate = np.all(nbrs == nbrs[:, :1, :], axis=(1, 2))
    normals[degenerate] = (0.0, 0.0, 1.0)
    return normals


def one_sided_point_to_plane(test: PointCloud, ref: PointCloud, ref_normals) -> float:
    """Mean squared projection of each test point's error onto its neighbor's normal."""
    _check_nonempty(test, ref)
    nn, _ = build(ref).query(test.positions)
    err = test.positions - ref.positions[nn]
    proj = np.einsum("ij,ij->i", err, np.asarray(ref_normals)[nn])
    return _mean(proj * proj)


def _normals_for(cloud: PointCloud, k: int) -> np.ndarray:
    if cloud.normals is not None:
        return cloud.normals
    return _pca_normals(cloud, min(k, len(cloud)))


def point_to_plane(a: PointCloud, b: PointCloud, k: int = DEFAULT_NORMALS_K) -> float:
    """Bidirectional point-to-plane MSE; missing normals are estimated with ``k`` neighbors."""
    _check_nonempty(a, b)
    return max(
        one_sided_point_to_plane(a, b, _normals_for(b, k)),
        one_sided_point_to_plane(b, a, _normals_for(a, k)),
    )


class ColorDistortion(NamedTuple):
    d_cY: float
    d_cU: float
    d_cV: float
    d_c: float


def one_sided_color(test: PointCloud, ref: PointCloud, nn=None) -> np.ndarray:
    """Per-channel (Y, U, V) color MSE from test points to their nearest reference points."""
    if nn is None:
        nn, _ = build(ref).query(test.positions)
    diff = test.colors - ref.colors[nn]
    sq = diff * diff
    return np.array([_mean(sq[:, ch]) for ch in range(3)])


def weighted_color(per_channel) -> float:
    y, u, v = per_channel
    return (6.0 * y + u + v) / 8.0


def color_distortion(a: PointCloud, b: PointCloud) -> ColorDistortion:
    """Per-channel bidirectional color MSE and their 6:1:1 weighted average."""
    _check_nonempty(a, b)
    per_channel = np.maximum(one_sided_color(a, b), one_sided_color(b, a))
    y, u, v = (float(x) for x in per_channel)
    return ColorDistortion(y, u, v, weighted_color((y, u, v)))


def attribute_covariance(cloud: PointCloud) -> np.ndarray:
    """Population covariance (divide by N) of the per-point (g_bar, c_bar) pairs."""
    _check_nonempty(cloud)
    pairs = attribute_pairs(cloud.positions, cloud.colors)
    mean = np.array([_mean(pairs[:, 0]), _mean(pairs[:, 1])])
    dev = pairs - mean
    s00 = _mean(dev[:, 0] * dev[:, 0])
    s01 = _mean(dev[:, 0] * dev[:, 1])
    s11 = _mean(dev[:, 1] * dev[:, 1])
    return np.array([[s00, s01], [s01, s11]])


@dataclass(frozen=True)
class PooledCovariance:
    """Count-weighted pool of two attribute covariances.

    ``s`` is the regularized matrix used for inversion; ``raw`` is the pool
    before regularization.
    """

    s: np.ndarray
    raw: np.ndarray
    n_a: int
    n_b: int


def regularize(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    eps = COV_REGULARIZATION * max(1.0, float(np.trace(s)))
    return s + eps * np.eye(2)


def pooled_covariance(a: PointCloud, b: PointCloud) -> PooledCovariance:
    na, nb = len(a), len(b)
    raw = (na * attribute_covariance(a) + nb * attribute_covariance(b)) / (na + nb)
    return PooledCovariance(regularize(raw), raw, na, nb)


def unified_distortion(d_g: float, d_c: float, s) -> float:
    """Mahalanobis-style norm of ``[d_g, d_c]`` under the pooled covariance."""
    s = s.s if isinstance(s, PooledCovariance) else np.asarray(s, dtype=np.float64)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"covariance is not positive definite: {s.tolist()}") from None
    y0 = d_g / chol[0, 0]
    y1 = (d_c - chol[1, 0] * y0) / chol[1, 1]
    return math.hypot(y0, y1)


def pc_psnr(D: float, peak: float = PSNR_PEAK) -> float:
    """PSNR of a unified distortion with peak 2; ``inf`` for zero distortion."""
    if D < 0 or math.isnan(D):
        raise ValueError(f"distortion must be non-negative, got {D}")
    if D == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / D)


@dataclass(frozen=True)
class MetricConfig:
    normals_k: int = DEFAULT_NORMALS_K


@dataclass
class DistortionReport:
    d_g: float
    d_p: float
    d_cY: float
    d_cU: float
    d_cV: float
    d_c: float
    D: float
    pc_psnr: float
    d_g_test_to_ref: float
    d_g_ref_to_test: float
    d_p_test_to_ref: float
    d_p_ref_to_test: float
    d_c_test_to_ref: float
    d_c_ref_to_test: float
    n_ref: int
    n_test: int
    normals_ref: Optional[np.ndarray] = field(default=None, repr=False)
    normals_test: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["normals_ref"], d["normals_test"]
        return d


def full_report(ref: PointCloud, test: PointCloud, config: MetricConfig | None = None) -> DistortionReport:
    """All distortion measures between a reference cloud and a test (decoded) cloud."""
    config = config or MetricConfig()
    _check_nonempty(ref, test)
    ref_index, test_index = build(ref), build(test)
    nn_tr, sq_tr = ref_index.query(test.positions)
    nn_rt, sq_rt = test_index.query(ref.positions)

    d_g_tr, d_g_rt = _mean(sq_tr), _mean(sq_rt)

    normals_ref = _normals_for(ref, config.normals_k)
    normals_test = _normals_for(test, config.normals_k)
    proj_tr = np.einsum("ij,ij->i", test.positions - ref.positions[nn_tr], normals_ref[nn_tr])
    proj_rt = np.einsum("ij,ij->i", ref.positions - test.positions[nn_rt], normals_test[nn_rt])
    d_p_tr, d_p_rt = _mean(proj_tr * proj_tr), _mean(proj_rt * proj_rt)

    col_tr = one_sided_color(test, ref, nn_tr)
    col_rt = one_sided_color(ref, test, nn_rt)
    y, u, v = (float(x) for x in np.maximum(col_tr, col_rt))
    d_c = weighted_color((y, u, v))

    d_g = max(d_g_tr, d_g_rt)
    D = unified_distortion(d_g, d_c, pooled_covariance(ref, test))
    return DistortionReport(
        d_g=d_g,
        d_p=max(d_p_tr, d_p_rt),
        d_cY=y,
        d_cU=u,
        d_cV=v,
        d_c=d_c,
        D=D,
        pc_psnr=pc_psnr(D),
        d_g_test_to_ref=d_g_tr,
        d_g_ref_to_test=d_g_rt,
        d_p_test_to_ref=d_p_tr,
        d_p_ref_to_test=d_p_rt,
        d_c_test_to_ref=weighted_color(col_tr),
        d_c_ref_to_test=weighted_color(col_rt),
        n_ref=len(ref),
        n_test=len(test),
        normals_ref=normals_ref,
        normals_test=normals_test,
    )
