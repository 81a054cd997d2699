import json

import numpy as np
import pytest

from noiserobust.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def test_bounds_quantization(capsys):
    code, out = run(capsys, "bounds", "--type", "quantization", "--r-star", 0.05, "--d", 150528)
    doc = json.loads(out)
    assert code == 0 and doc["depth"] == 5 and doc["delta"] == pytest.approx(15.76, abs=0.01)


def test_bounds_lp(capsys):
    code, out = run(capsys, "bounds", "--type", "lp", "--w", "1,1,1,1", "--p", 2, "--eps", 1e-3)
    doc = json.loads(out)
    assert code == 0 and doc["zeta1"] == pytest.approx(0.02236, abs=1e-5) and doc["valid"]


def test_exit_codes(capsys, tmp_path):
    code, out = run(capsys, "bounds", "--type", "gaussian", "--w", "1,2", "--eps", 0.4)
    assert code == 0 and json.loads(out)["valid"] is False
    assert run(capsys, "bounds", "--type", "lp")[0] == 2
    assert run(capsys, "experiment", "gaussian", "--epsilon", 0.4)[0] == 2
    assert run(capsys, "train", "--data", tmp_path / "missing.csv")[0] == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("label,f0\n1\n")
    assert run(capsys, "train", "--data", bad)[0] == 3
    assert run(capsys, "bounds", "--type", "tail", "--w", "1,1", "--t", 5)[0] == 4
    assert run(capsys, "nonsense")[0] == 2


def test_config_overrides_flags(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"r_star": 0.1}))
    _, out = run(capsys, "bounds", "--type", "quantization", "--r-star", 0.05, "--d", 150528,
                 "--config", cfg)
    assert json.loads(out)["bits"] == pytest.approx(4.016 - 1, abs=0.01)


def test_pipeline(capsys, tmp_path):
    data, model = tmp_path / "d.csv", tmp_path / "m.json"
    assert run(capsys, "dataset", "--d", 6, "--n", 200, "--seed", 1, "--out", data)[0] == 0
    code, out = run(capsys, "train", "--data", data, "--epochs", 100, "--out", model)
    assert code == 0 and json.loads(out)["accuracy"] > 0.9
    code, out = run(capsys, "adversarial", "--model", model, "--data", data, "--index", 0,
                    "--p", "inf")
    norm = json.loads(out)["norm"]
    code, out = run(capsys, "radius", "--model", model, "--data", data, "--index", 0, "--p", "inf",
                    "--eps", 0.1, "--n-samples", 2000, "--alpha-hi", 50 * norm)
    assert code == 0 and json.loads(out)["radius"] >= norm
    samples = tmp_path / "s.bin"
    assert run(capsys, "sample", "--noise", "lp", "--p", 2, "--d", 6, "--n", 5,
               "--out", samples)[0] == 0
    stem = tmp_path / "rep"
    code, out = run(capsys, "experiment", "lp", "--p-grid", "2", "--n-points", 2, "--n-train", 100,
                    "--n-samples", 1000, "--data", data, "--output", stem)
    assert code == 0 and (tmp_path / "rep.csv").exists()
    code, out = run(capsys, "calibrate", "--report", tmp_path / "rep.csv", "--d", 6)
    assert code == 0 and json.loads(out)["zeta0"] > 0


def test_quantize_command(capsys):
    code, out = run(capsys, "quantize", "--point", "100,0,250", "--bits", 2)
    assert code == 0 and [float(v) for v in out.split(",")] == [85.0, 0.0, 255.0]


def test_idx_dataset(capsys, tmp_path):
    out = tmp_path / "im.idx"
    assert run(capsys, "dataset", "--kind", "blob-images", "--n", 9, "--format", "idx",
               "--out", out)[0] == 0
    assert out.read_bytes()[:4] == bytes.fromhex("00000803")
