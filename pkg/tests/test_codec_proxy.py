import math

import numpy as np
import pytest

from pcrd.codec_proxy import (
    MeasurementCsvError, ProxyCodecConfig, encode, encode_decode, ingest_csv, measure, preencode_sweep, qp_step,
    write_csv,
)
from pcrd.metrics import full_report, point_to_point
from pcrd.pointcloud import PointCloud
from pcrd.rdmodel import Measurement, preencode_schedule
from pcrd.synthetic import synthetic_cloud


@pytest.fixture(scope="module")
def cloud10k():
    return synthetic_cloud(10_000, seed=0)


def test_step_law():
    assert qp_step(4) == 1 and qp_step(10) == 2 and qp_step(22) == 8
    cfg = ProxyCodecConfig()
    steps = [cfg.geometry_step(q) for q in range(2, 52)]
    assert all(a <= b for a, b in zip(steps, steps[1:])) and min(steps) > 0


def test_config_validation():
    with pytest.raises(ValueError):
        ProxyCodecConfig(frame_rate=0)
    with pytest.raises(ValueError):
        ProxyCodecConfig(min_step=0)


def test_floor_is_lossless_on_integer_grid(cloud10k):
    dec, _ = encode_decode(cloud10k, 2, 2)
    assert len(dec) == len(cloud10k)
    assert point_to_point(cloud10k, dec) == 0
    r = full_report(cloud10k, dec)
    assert r.d_g == 0 and r.d_c < 0.1


def test_forced_merge():
    c = PointCloud([[0, 0, 0], [0.2, 0.1, 0]], [[10, 20, 30], [30, 40, 50]])
    dec, _ = encode_decode(c, 4, 4)
    assert len(dec) == 1
    assert np.allclose(dec.colors, [[20, 30, 40]])


def test_qp_range_checked(cloud10k):
    with pytest.raises(ValueError):
        encode(cloud10k, 1, 30)
    with pytest.raises(ValueError):
        encode(cloud10k, 30, 52)


def test_monotone_in_geometry_qp(cloud10k):
    d, bits = [], []
    for q in (10, 20, 30, 40, 50):
        dec, b = encode_decode(cloud10k, q, 30)
        d.append(point_to_point(cloud10k, dec))
        bits.append(b)
    assert all(a <= b for a, b in zip(d, d[1:]))
    assert all(a >= b for a, b in zip(bits, bits[1:]))


def test_sweep_rows_and_monotonicity(cloud10k):
    rows = preencode_sweep(cloud10k)
    assert [(m.q_g, m.q_c) for m in rows] == preencode_schedule()
    assert sum((m.q_g, m.q_c) == (30, 35) for m in rows) == 1
    geo = sorted((m for m in rows if m.q_c == 35), key=lambda m: m.q_g)
    col = sorted((m for m in rows if m.q_g == 30), key=lambda m: m.q_c)
    for sweep in (geo, col):
        assert all(a.D <= b.D for a, b in zip(sweep, sweep[1:]))
        assert all(a.R >= b.R for a, b in zip(sweep, sweep[1:]))
    for m in rows:
        assert m.R == pytest.approx(m.R_g + m.R_c, abs=1e-12)


def test_sweep_deterministic():
    c = synthetic_cloud(2000, seed=5)
    assert preencode_sweep(c) == preencode_sweep(c)


def test_rate_units():
    c = synthetic_cloud(1500, seed=2)
    enc = encode(c, 20, 30)
    assert measure(c, 20, 30, ProxyCodecConfig(frame_rate=60)).R == enc.bits * 60 / 1e6


def test_dither_is_seeded():
    c = synthetic_cloud(1500, seed=2)
    a = encode(c, 24, 30, ProxyCodecConfig(rng_seed=3)).decoded.positions
    b = encode(c, 24, 30, ProxyCodecConfig(rng_seed=3)).decoded.positions
    assert np.array_equal(a, b)


def test_csv_roundtrip(tmp_path):
    rows = preencode_sweep(synthetic_cloud(1000, seed=1))
    write_csv(rows, tmp_path / "m.csv")
    assert ingest_csv(tmp_path / "m.csv") == rows
    plain = [Measurement(m.q_g, m.q_c, m.D, m.R) for m in rows]
    write_csv(plain, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "q_g,q_c,D,R"
    assert ingest_csv(tmp_path / "p.csv") == plain


@pytest.mark.parametrize("body,pattern", [
    ("q_g,q_c,D,R\n60,35,1,1\n", r"row 2, field q_g"),
    ("q_g,q_c,D,R\n30,35,1,1\n30,35.5,1,1\n", r"row 3, field q_c"),
    ("q_g,q_c,D,R\n30,35,x,1\n", r"row 2, field D"),
    ("q_g,q_c,D,R\n30,35,1,0\n", r"row 2"),
    ("q_g,q_c,D,R\n30,35,1\n", r"row 2 has 3 fields"),
    ("q,c,D,R\n", r"header"),
    ("", r"empty"),
])
def test_csv_errors(tmp_path, body, pattern):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(MeasurementCsvError, match=pattern):
        ingest_csv(p)


def test_nine_row_file(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("q_g,q_c,D,R\n" + "".join(f"{g},{c},1.5,2.5\n" for g, c in preencode_schedule()))
    assert len(ingest_csv(p)) == 9


def test_synthetic_cloud_properties(monkeypatch):
    c = synthetic_cloud(5000, seed=4)
    assert len(c) == 5000
    assert len(np.unique(c.positions, axis=0)) == 5000
    assert np.array_equal(c.positions, np.rint(c.positions))
    monkeypatch.setenv("PCRD_SEED", "4")
    assert np.array_equal(synthetic_cloud(5000).positions, c.positions)
    with pytest.raises(ValueError):
        synthetic_cloud(0)
