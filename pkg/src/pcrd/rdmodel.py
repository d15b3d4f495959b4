"""Separable polynomial distortion and rate models over (q_g, q_c).

Distortion is a quartic in each QP and rate is a quadratic in q_g plus a
cubic in q_c. The combined models are the literal sums of the per-QP
polynomials, including both constant terms.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

QP_MIN = 2
QP_MAX = 51

GEOMETRY_SWEEP = ((33, 35), (30, 35), (26, 35), (20, 35), (15, 35))
COLOR_SWEEP = ((30, 38), (30, 35), (30, 31), (30, 26), (30, 20))
DEFAULT_ANCHOR = (30, 35)

# scaled Vandermonde systems worse than this are refused
MAX_CONDITION = 1e10


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class Measurement:
    """One pre-encoding run: QPs, unified distortion and bit-rate in Mbps."""

    q_g: int
    q_c: int
    D: float
    R: float
    R_g: Optional[float] = None
    R_c: Optional[float] = None

    def __post_init__(self):
        for name in ("q_g", "q_c"):
            q = getattr(self, name)
            if q != int(q) or not QP_MIN <= q <= QP_MAX:
                raise ValueError(f"{name}={q} is not an integer QP in [{QP_MIN}, {QP_MAX}]")
            object.__setattr__(self, name, int(q))
        if not self.D >= 0:
            raise ValueError(f"D={self.D} must be >= 0")
        if not self.R > 0:
            raise ValueError(f"R={self.R} must be > 0")
        for name in ("R_g", "R_c"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name}={v} must be >= 0")


def preencode_schedule() -> list[tuple[int, int]]:
    """The nine distinct (q_g, q_c) pre-encoding pairs: geometry sweep, then the
    four new color-sweep pairs."""
    pairs = list(GEOMETRY_SWEEP)
    pairs += [p for p in COLOR_SWEEP if p not in pairs]
    return pairs


@dataclass(frozen=True)
class RdModels:
    """Fitted coefficients, each array in descending-degree order.

    ``a``: distortion quartic in q_g, ``b``: distortion quartic in q_c,
    ``c``: rate quadratic in q_g, ``d``: rate cubic in q_c.
    """

    a: tuple
    b: tuple
    c: tuple
    d: tuple
    anchor: tuple = DEFAULT_ANCHOR

    def __post_init__(self):
        for name, deg in (("a", 4), ("b", 4), ("c", 2), ("d", 3)):
            coef = tuple(float(x) for x in getattr(self, name))
            if len(coef) != deg + 1:
                raise ValueError(f"{name} needs {deg + 1} coefficients, got {len(coef)}")
            object.__setattr__(self, name, coef)
        object.__setattr__(self, "anchor", tuple(int(q) for q in self.anchor))

    def distortion(self, q_g, q_c):
        return eval_distortion(self, q_g, q_c)

    def rate(self, q_g, q_c):
        return eval_rate(self, q_g, q_c)

    def to_dict(self) -> dict:
        return {"a": list(self.a), "b": list(self.b), "c": list(self.c), "d": list(self.d),
                "anchor": list(self.anchor)}

    @classmethod
    def from_dict(cls, data: dict) -> "RdModels":
        missing = {"a", "b", "c", "d"} - set(data)
        if missing:
            raise ValueError(f"models JSON lacks {sorted(missing)}")
        return cls(data["a"], data["b"], data["c"], data["d"], tuple(data.get("anchor", DEFAULT_ANCHOR)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RdModels":
        return cls.from_dict(json.loads(text))


def _horner(coef, x):
    acc = 0.0 * x
    for c in coef:
        acc = acc * x + c
    return acc


def _derivative(coef):
    deg = len(coef) - 1
    return tuple(c * (deg - i) for i, c in enumerate(coef[:-1]))


def eval_distortion(m: RdModels, q_g, q_c):
    return _horner(m.a, q_g) + _horner(m.b, q_c)


def eval_rate(m: RdModels, q_g, q_c):
    return _horner(m.c, q_g) + _horner(m.d, q_c)


def grad_distortion(m: RdModels, q_g, q_c):
    return _horner(_derivative(m.a), q_g), _horner(_derivative(m.b), q_c)


def grad_rate(m: RdModels, q_g, q_c):
    return _horner(_derivative(m.c), q_g), _horner(_derivative(m.d), q_c)


def polyfit_scaled(q, y, deg: int) -> np.ndarray:
    """Fit a degree-``deg`` polynomial, returned in descending raw-``q`` order.

    With ``deg + 1`` points the Vandermonde system is solved exactly;
    otherwise in the least-squares sense. QPs are mapped onto [-1, 1] before
    solving and the coefficients mapped back afterwards.
    """
    q = np.asarray(q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(q)) < deg + 1:
        raise FitError(f"degree-{deg} fit needs {deg + 1} distinct QPs, got {len(np.unique(q))}")
    center = (q.max() + q.min()) / 2.0
    half = (q.max() - q.min()) / 2.0
    t = (q - center) / half
    V = np.vander(t, deg + 1, increasing=True)
    cond = np.linalg.cond(V)
    if not cond < MAX_CONDITION:
        raise FitError(f"Vandermonde system is ill-conditioned (cond={cond:.3g})")
    if len(q) == deg + 1:
        coef_t = np.linalg.solve(V, y)
    else:
        coef_t, *_ = np.linalg.lstsq(V, y, rcond=None)
    raw = Polynomial(coef_t)(Polynomial([-center / half, 1.0 / half])).coef
    raw = np.pad(raw, (0, deg + 1 - len(raw)))
    return raw[::-1]


def find_anchor(pairs: Sequence[tuple[int, int]], min_points: int = 5) -> tuple[int, int]:
    """The pair shared by a geometry sweep and a color sweep of ``min_points`` each.

    Prefers the standard anchor, then the pair with the most sweep points,
    then the smallest pair.
    """
    pairs = set(pairs)
    candidates = []
    for qg, qc in pairs:
        n_geo = sum(1 for p in pairs if p[1] == qc)
        n_col = sum(1 for p in pairs if p[0] == qg)
        if n_geo >= min_points and n_col >= min_points:
            candidates.append((-(n_geo + n_col), (qg, qc)))
    if not candidates:
        raise FitError(
            f"no anchor pair with a geometry sweep and a color sweep of {min_points} QPs each"
        )
    if any(p == DEFAULT_ANCHOR for _, p in candidates):
        return DEFAULT_ANCHOR
    return min(candidates)[1]


def split_sweeps(measurements: Sequence[Measurement], anchor=None):
    """Return ``(anchor, geometry_sweep, color_sweep)``, each sweep sorted by its QP."""
    measurements = list(measurements)
    dup = [p for p, n in Counter((m.q_g, m.q_c) for m in measurements).items() if n > 1]
    if dup:
        raise FitError(f"duplicate measurements for QP pairs {sorted(dup)}")
    pairs = [(m.q_g, m.q_c) for m in measurements]
    if anchor is None:
        anchor = find_anchor(pairs)
    anchor = tuple(int(q) for q in anchor)
    if anchor not in pairs:
        raise FitError(f"anchor {anchor} is not among the measurements")
    geo = sorted((m for m in measurements if m.q_c == anchor[1]), key=lambda m: m.q_g)
    col = sorted((m for m in measurements if m.q_g == anchor[0]), key=lambda m: m.q_c)
    if len(geo) < 5:
        raise FitError(f"geometry sweep at q_c={anchor[1]} has {len(geo)} QPs, need 5")
    if len(col) < 5:
        raise FitError(f"color sweep at q_g={anchor[0]} has {len(col)} QPs, need 5")
    return anchor, geo, col


def fit(measurements: Sequence[Measurement], anchor=None) -> RdModels:
    """Fit the four per-QP polynomials from a geometry sweep and a color sweep.

    Distortion quartics interpolate five-point sweeps exactly; the rate
    quadratic and cubic are least-squares fits over the same sweeps.
    """
    anchor, geo, col = split_sweeps(measurements, anchor)
    qg = [m.q_g for m in geo]
    qc = [m.q_c for m in col]
    try:
        a = polyfit_scaled(qg, [m.D for m in geo], 4)
        c = polyfit_scaled(qg, [m.R for m in geo], 2)
    except FitError as e:
        raise FitError(f"geometry sweep: {e}") from None
    try:
        b = polyfit_scaled(qc, [m.D for m in col], 4)
        d = polyfit_scaled(qc, [m.R for m in col], 3)
    except FitError as e:
        raise FitError(f"color sweep: {e}") from None
    return RdModels(a, b, c, d, anchor)
