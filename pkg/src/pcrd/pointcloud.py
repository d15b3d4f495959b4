"""Point cloud container and BT.709 color conversion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

# Full-range BT.709 analog form, chroma centered at 127.5 on the 8-bit scale.
_KR, _KG, _KB = 0.2126, 0.7152, 0.0722
_U_SCALE = 1.8556
_V_SCALE = 1.5748
CHROMA_OFFSET = 127.5

RGB_TO_YUV = np.array(
    [
        [_KR, _KG, _KB],
        [-_KR / _U_SCALE, -_KG / _U_SCALE, (1.0 - _KB) / _U_SCALE],
        [(1.0 - _KR) / _V_SCALE, -_KG / _V_SCALE, -_KB / _V_SCALE],
    ]
)
YUV_TO_RGB = np.linalg.inv(RGB_TO_YUV)
_YUV_OFFSET = np.array([0.0, CHROMA_OFFSET, CHROMA_OFFSET])


def rgb_to_yuv(rgb):
    """Convert RGB on the [0, 255] scale to full-range BT.709 YUV.

    Accepts a single triple or an ``(N, 3)`` array. Inputs are clamped to
    [0, 255] first, and each output channel lands in [0, 255].
    """
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 255.0)
    yuv = rgb @ RGB_TO_YUV.T + _YUV_OFFSET
    # U and V can overshoot [0, 255] by one ulp at the primaries.
    return np.clip(yuv, 0.0, 255.0)


def yuv_to_rgb(yuv):
    """Inverse of :func:`rgb_to_yuv`, without clamping or rounding."""
    yuv = np.asarray(yuv, dtype=np.float64)
    return (yuv - _YUV_OFFSET) @ YUV_TO_RGB.T


class Point(NamedTuple):
    position: tuple
    color: tuple


def weighted_attributes(point: Point) -> tuple[float, float]:
    """Return ``(g_bar, c_bar)``: the mean coordinate and the 6:1:1 YUV mean."""
    x, y, z = point.position
    yy, u, v = point.color
    return (x + y + z) / 3.0, (6.0 * yy + u + v) / 8.0


def attribute_pairs(positions, colors) -> np.ndarray:
    """Vectorized :func:`weighted_attributes`, returning an ``(N, 2)`` array."""
    positions = np.asarray(positions, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.float64)
    g_bar = (positions[:, 0] + positions[:, 1] + positions[:, 2]) / 3.0
    c_bar = (6.0 * colors[:, 0] + colors[:, 1] + colors[:, 2]) / 8.0
    return np.column_stack([g_bar, c_bar])


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered points with YUV colors and optional unit normals.

    ``positions`` and ``colors`` are ``(N, 3)`` float64 arrays. The arrays are
    made read-only on construction so a cloud can be shared freely.
    """

    positions: np.ndarray
    colors: np.ndarray
    normals: Optional[np.ndarray] = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        positions = _as_frozen(self.positions, "positions")
        colors = _as_frozen(self.colors, "colors")
        if colors.shape != positions.shape:
            raise ValueError(
                f"colors shape {colors.shape} does not match positions {positions.shape}"
            )
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions must be finite")
        if colors.size and (colors.min() < 0.0 or colors.max() > 255.0):
            raise ValueError("colors must lie in [0, 255]")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "colors", colors)
        if self.normals is not None:
            normals = _as_frozen(self.normals, "normals")
            if normals.shape != positions.shape:
                raise ValueError("normals must have the same shape as positions")
            norms = np.linalg.norm(normals, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("normals must be unit vectors")
            object.__setattr__(self, "normals", normals)

    @classmethod
    def from_rgb(cls, positions, rgb, label: str = "") -> "PointCloud":
        return cls(np.asarray(positions, dtype=np.float64), rgb_to_yuv(rgb), label=label)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, i) -> Point:
        return Point(tuple(self.positions[i]), tuple(self.colors[i]))

    @property
    def rgb(self) -> np.ndarray:
        return yuv_to_rgb(self.colors)

    def with_normals(self, normals) -> "PointCloud":
        return PointCloud(self.positions, self.colors, normals, self.label)

    def take(self, indices) -> "PointCloud":
        """Subset or reorder the points."""
        indices = np.asarray(indices)
        normals = None if self.normals is None else self.normals[indices]
        return PointCloud(self.positions[indices], self.colors[indices], normals, self.label)

    def attribute_pairs(self) -> np.ndarray:
        return attribute_pairs(self.positions, self.colors)


def _as_frozen(a, name: str) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim == 1 and a.size == 3:
        a = a.reshape(1, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must be an (N, 3) array, got shape {a.shape}")
    a.setflags(write=False)
    return a
