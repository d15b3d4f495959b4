"""Synthetic voxelized test clouds with smooth colors."""

from __future__ import annotations

import os

import numpy as np

from .pointcloud import PointCloud

SEED_ENV = "PCRD_SEED"


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else fallback


def synthetic_cloud(n: int = 10_000, seed: int | None = None, extent: int | None = None) -> PointCloud:
    """``n`` distinct integer voxels on a bumpy closed surface, colored smoothly.

    The surface is a radially modulated ellipsoid filling roughly a
    ``extent``-sized cube; colors vary with height and azimuth plus a little
    seeded noise, so both the geometry and color quantizers see structure.
    The default extent keeps neighboring points about a voxel apart, as in
    captured clouds.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if extent is None:
        extent = max(16, int(round(2.5 * np.sqrt(n))))
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    chosen = np.empty((0, 3), dtype=np.int64)
    while len(chosen) < n:
        m = 2 * (n - len(chosen)) + 64
        u = rng.uniform(-1.0, 1.0, m)
        phi = rng.uniform(0.0, 2.0 * np.pi, m)
        s = np.sqrt(1.0 - u * u)
        r = 1.0 + 0.15 * np.sin(3.0 * phi) * s + 0.1 * np.cos(5.0 * u)
        pts = np.column_stack([0.3 * r * s * np.cos(phi), 0.25 * r * s * np.sin(phi), 0.45 * r * u])
        vox = np.rint((pts + 0.5) * extent).astype(np.int64)
        allv = np.vstack([chosen, vox])
        _, first = np.unique(allv, axis=0, return_index=True)
        chosen = allv[np.sort(first)]
    chosen = chosen[:n]
    p = chosen / extent - 0.5
    height = p[:, 2] / 0.55
    azimuth = np.arctan2(p[:, 1], p[:, 0])
    rgb = np.column_stack([
        128 + 100 * height + 20 * np.sin(4 * azimuth),
        128 + 80 * np.cos(2 * azimuth) - 30 * height,
        128 - 90 * height + 25 * np.cos(6 * p[:, 0] * np.pi),
    ])
    rgb += rng.normal(0.0, 4.0, rgb.shape)
    return PointCloud.from_rgb(chosen.astype(np.float64), np.clip(rgb, 0, 255), label=f"synthetic-{n}")
