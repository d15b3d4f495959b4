"""A deterministic stand-in codec and measurement-file ingestion.

``encode_decode`` quantizes positions and colors with a video-codec style
QP-to-step law, merges points that land in the same geometry cell and
charges first-order entropy for the quantized symbols. It is not V-PCC and
makes no attempt to match V-PCC bit-rates; it only has to respond to QPs
smoothly and monotonically so the fit/optimize pipeline can run.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .metrics import MetricConfig, full_report
from .pointcloud import PointCloud
from .rdmodel import QP_MAX, QP_MIN, Measurement, preencode_schedule


def qp_step(q) -> float:
    return 2.0 ** ((q - 4) / 6.0)


@dataclass(frozen=True)
class ProxyCodecConfig:
    """``frame_rate`` converts bits per frame to Mbps. ``rng_seed`` enables a
    seeded uniform dither before geometry rounding (off by default).
    ``min_step`` keeps the codec from quantizing finer than the input grid."""

    frame_rate: float = 30.0
    rng_seed: Optional[int] = None
    min_step: float = 1.0

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        if not self.min_step > 0:
            raise ValueError("min_step must be positive")

    def geometry_step(self, q) -> float:
        return max(qp_step(q), self.min_step)

    def color_step(self, q) -> float:
        return max(qp_step(q), self.min_step)


def _entropy_bits(symbols: np.ndarray) -> float:
    """Total first-order entropy, in bits, of a 1-D symbol sequence."""
    if symbols.size == 0:
        return 0.0
    _, counts = np.unique(symbols, return_counts=True)
    p = counts / symbols.size
    return float(-(counts * np.log2(p)).sum())


@dataclass(frozen=True)
class EncodeResult:
    decoded: PointCloud
    bits: int
    geometry_bits: int
    color_bits: int


def _check_qp(name, q):
    if not QP_MIN <= q <= QP_MAX:
        raise ValueError(f"{name}={q} outside [{QP_MIN}, {QP_MAX}]")


def encode(cloud: PointCloud, q_g: int, q_c: int, config: ProxyCodecConfig | None = None) -> EncodeResult:
    config = config or ProxyCodecConfig()
    _check_qp("q_g", q_g)
    _check_qp("q_c", q_c)
    if len(cloud) == 0:
        raise ValueError("cannot encode an empty cloud")

    step_g = config.geometry_step(q_g)
    scaled = cloud.positions / step_g
    if config.rng_seed is not None:
        rng = np.random.default_rng(config.rng_seed)
        scaled = scaled + rng.uniform(-0.5, 0.5, size=scaled.shape)
    sym = np.rint(scaled).astype(np.int64)
    cells, inverse, counts = np.unique(sym, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)

    merged = np.empty((len(cells), 3))
    for ch in range(3):
        merged[:, ch] = np.bincount(inverse, weights=cloud.colors[:, ch], minlength=len(cells)) / counts

    step_c = config.color_step(q_c)
    csym = np.rint(merged / step_c).astype(np.int64)
    colors = np.clip(csym * step_c, 0.0, 255.0)

    # cells come back lexicographically sorted; code each axis as deltas
    # from the previous cell, the way predictive geometry coders do
    deltas = np.diff(cells, axis=0, prepend=np.zeros((1, 3), dtype=np.int64))
    geometry_bits = math.ceil(sum(_entropy_bits(deltas[:, ax]) for ax in range(3)))
    color_bits = math.ceil(sum(_entropy_bits(csym[:, ch]) for ch in range(3)))
    decoded = PointCloud(cells * step_g, colors, label=f"{cloud.label}@qg{q_g}qc{q_c}")
    return EncodeResult(decoded, geometry_bits + color_bits, geometry_bits, color_bits)


def encode_decode(cloud: PointCloud, q_g: int, q_c: int, config: ProxyCodecConfig | None = None):
    """Return ``(decoded_cloud, bits)`` for one proxy encode at the given QPs."""
    result = encode(cloud, q_g, q_c, config)
    return result.decoded, result.bits


def measure(cloud, q_g, q_c, config=None, metric_config=None) -> Measurement:
    """Encode at ``(q_g, q_c)`` and measure unified distortion and Mbps."""
    config = config or ProxyCodecConfig()
    result = encode(cloud, q_g, q_c, config)
    report = full_report(cloud, result.decoded, metric_config or MetricConfig())
    scale = config.frame_rate / 1e6
    return Measurement(
        q_g, q_c, report.D, result.bits * scale,
        R_g=result.geometry_bits * scale, R_c=result.color_bits * scale,
    )


def preencode_sweep(cloud: PointCloud, config=None, metric_config=None) -> list[Measurement]:
    """One measurement per pre-encoding pair, in schedule order."""
    return [measure(cloud, qg, qc, config, metric_config) for qg, qc in preencode_schedule()]


CSV_FIELDS = ("q_g", "q_c", "D", "R", "R_g", "R_c")


class MeasurementCsvError(ValueError):
    pass


def write_csv(measurements, path) -> None:
    """Write measurements with 17 significant digits; split rates only if all rows have them.

    ``path`` may also be an open text file.
    """
    measurements = list(measurements)
    split = bool(measurements) and all(m.R_g is not None and m.R_c is not None for m in measurements)
    fields = CSV_FIELDS if split else CSV_FIELDS[:4]
    if hasattr(path, "write"):
        _write_rows(path, measurements, fields)
    else:
        with open(path, "w", newline="") as f:
            _write_rows(f, measurements, fields)


def _write_rows(f, measurements, fields):
    w = csv.writer(f, lineterminator="\n")
    w.writerow(fields)
    for m in measurements:
        w.writerow([m.q_g, m.q_c] + [format(getattr(m, k), ".17g") for k in fields[2:]])


def ingest_csv(path) -> list[Measurement]:
    """Parse and validate a measurement CSV (``q_g,q_c,D,R[,R_g,R_c]``)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MeasurementCsvError(f"{path}: empty file") from None
        if tuple(header) not in (CSV_FIELDS[:4], CSV_FIELDS):
            raise MeasurementCsvError(
                f"{path}: header must be q_g,q_c,D,R or q_g,q_c,D,R,R_g,R_c, got {','.join(header)}"
            )
        rows = []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MeasurementCsvError(f"{path}: row {rowno} has {len(row)} fields, expected {len(header)}")
            values = {}
            for name, cell in zip(header, row):
                try:
                    values[name] = float(cell)
                except ValueError:
                    raise MeasurementCsvError(f"{path}: row {rowno}, field {name}: not a number ({cell!r})") from None
            for name in ("q_g", "q_c"):
                q = values[name]
                if q != int(q) or not QP_MIN <= q <= QP_MAX:
                    raise MeasurementCsvError(
                        f"{path}: row {rowno}, field {name}: {cell_repr(q)} is not an integer QP in [{QP_MIN}, {QP_MAX}]"
                    )
            try:
                rows.append(Measurement(int(values["q_g"]), int(values["q_c"]), values["D"], values["R"],
                                        values.get("R_g"), values.get("R_c")))
            except ValueError as e:
                raise MeasurementCsvError(f"{path}: row {rowno}: {e}") from None
    return rows


def cell_repr(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)
