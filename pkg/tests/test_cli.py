import csv
import json
import math

import numpy as np
import pytest

from pcrd import cli
from pcrd.codec_proxy import ingest_csv, preencode_sweep, write_csv
from pcrd.metrics import MetricConfig, full_report
from pcrd.optimizer import SolverConfig, solve
from pcrd.ply import load_ply, save_ply
from pcrd.rdmodel import RdModels, fit
from pcrd.synthetic import synthetic_cloud


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    c = synthetic_cloud(3000, seed=11)
    save_ply(c, d / "ref.ply")
    dec = synthetic_cloud(3000, seed=12)
    save_ply(dec, d / "test.ply", "ascii")
    return d


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_metrics_identical(files, capsys):
    code, out, _ = run(["metrics", files / "ref.ply", files / "ref.ply"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["pc_psnr"] == "inf" and d["D"] == 0 and d["d_g"] == 0


def test_metrics_matches_library(files, capsys):
    code, out, _ = run(["metrics", files / "ref.ply", files / "test.ply", "--normals-k", "8"], capsys)
    assert code == 0
    lib = full_report(load_ply(files / "ref.ply"), load_ply(files / "test.ply"), MetricConfig(8)).to_dict()
    assert json.loads(out) == pytest.approx(lib, rel=0, abs=0)
    assert out == cli.to_json(lib) + "\n"


def test_metrics_corrupted(files, capsys, tmp_path):
    bad = tmp_path / "bad.ply"
    bad.write_bytes((files / "ref.ply").read_bytes()[:500])
    code, _, err = run(["metrics", files / "ref.ply", bad], capsys)
    assert code == 2 and "byte" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(["metrics", tmp_path / "nope.ply", tmp_path / "nope.ply"], capsys)
    assert code == 2 and "nope.ply" in err


def test_bad_flags(files, capsys):
    assert run(["optimize", "--models", "x.json", "--target-rate", "-1"], capsys)[0] == 2
    assert run(["metrics", files / "ref.ply", files / "ref.ply", "--normals-k", "0"], capsys)[0] == 2
    assert run(["metrics", files / "ref.ply", files / "ref.ply", "--config", '{"bogus": 1}'], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2


def test_sweep_fit_optimize_chain(files, capsys):
    d = files
    assert run(["sweep", d / "ref.ply", "--out", d / "m.csv"], capsys)[0] == 0
    rows = ingest_csv(d / "m.csv")
    assert rows == preencode_sweep(load_ply(d / "ref.ply"))
    assert run(["fit", d / "m.csv", "--out", d / "models.json"], capsys)[0] == 0
    models = RdModels.from_dict(json.loads((d / "models.json").read_text()))
    assert models == fit(rows)
    code, out, _ = run(["optimize", "--models", d / "models.json", "--target-rate", "0.2"], capsys)
    assert code == 0
    res = json.loads(out)
    direct = solve(models, 0.2, SolverConfig())
    assert (res["q_g_star"], res["q_c_star"]) == (direct.q_g_star, direct.q_c_star)
    assert out == cli.to_json(direct.to_dict()) + "\n"
    assert len(res["trace"]) == res["outer_iterations"]


def test_optimize_infeasible(files, capsys):
    d = files
    run(["sweep", d / "ref.ply", "--out", d / "m2.csv"], capsys)
    run(["fit", d / "m2.csv", "--out", d / "models2.json"], capsys)
    code, _, err = run(["optimize", "--models", d / "models2.json", "--target-rate", "1e-6"], capsys)
    assert code == 3 and "infeasible" in err


def test_optimize_config_override(files, capsys, tmp_path):
    models = tmp_path / "toy.json"
    models.write_text(RdModels((0, 0, 1, 0, 0), (0, 0, 1, 0, 0), (0, -1, 104), (0, 0, -1, 0)).to_json())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_outer": 1}))
    code, out, _ = run(["optimize", "--models", models, "--target-rate", "60", "--config", cfg], capsys)
    assert code == 0 and json.loads(out)["outer_iterations"] == 1
    code, out, _ = run(["optimize", "--models", models, "--target-rate", "60", "--target-rate", "70"], capsys)
    assert code == 0 and len(json.loads(out)) == 2


def test_bad_models_json(capsys, tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"a": [1]}')
    assert run(["optimize", "--models", p, "--target-rate", "1"], capsys)[0] == 2


def test_bad_csv(capsys, tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("q_g,q_c,D,R\n99,35,1,1\n")
    code, _, err = run(["fit", p], capsys)
    assert code == 2 and "row 2" in err


def test_pipeline_matches_library(files, capsys):
    d = files
    code, out, _ = run(["pipeline", d / "ref.ply", "--target-rate", "0.15", "--target-rate", "0.3",
                        "--out", d / "rd.csv"], capsys)
    assert code == 0
    with open(d / "rd.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(cli.PIPELINE_FIELDS)
    cloud = load_ply(d / "ref.ply")
    lib = cli.pipeline_rows(cloud, [0.15, 0.3], SolverConfig(), cli.ProxyCodecConfig(), MetricConfig())
    for row, want in zip(rows, lib):
        assert float(row["achieved_rate"]) <= float(row["target_rate"]) * 1.01
        assert (int(row["q_g"]), int(row["q_c"])) == (want["q_g"], want["q_c"])
        assert float(row["D"]) == want["D"]


def test_pipeline_infeasible_names_stage(files, capsys):
    code, _, err = run(["pipeline", files / "ref.ply", "--target-rate", "1e-6"], capsys)
    assert code == 3 and "optimize" in err


def test_synth(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PCRD_SEED", "9")
    assert run(["synth", "--points", "500", "--out", tmp_path / "s.ply"], capsys)[0] == 0
    assert np.array_equal(load_ply(tmp_path / "s.ply").positions, synthetic_cloud(500, seed=9).positions)
    assert run(["synth", "--points", "500"], capsys)[0] == 2


def test_json_format():
    assert cli.to_json({"x": 0.1, "n": 3, "i": math.inf, "l": [], "b": True}) == (
        '{\n  "x": 0.10000000000000001,\n  "n": 3,\n  "i": "inf",\n  "l": [],\n  "b": true\n}'
    )
