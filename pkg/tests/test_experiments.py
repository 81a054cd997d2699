import json
import math

import numpy as np
import pytest

from noiserobust import bounds as B
from noiserobust.experiments import (ConfigError, ExperimentConfig, read_report_csv,
                                     run_experiment)
from noiserobust.models import LinearModel, save_model

SMALL = {"dataset": {"d": 20}, "n_points": 4, "n_train": 200, "n_samples": 1000,
         "epochs": 100}


def _num(v):
    return math.inf if v == "inf" else float(v)


def _check_rows_consistent(path):
    rows = read_report_csv(path)
    for r in rows:
        lo, hi, rad = _num(r["lower"]), _num(r["upper"]), _num(r["radius"])
        assert lo <= hi
        assert r["within_bounds"] == str(int(lo <= rad <= hi and math.isfinite(rad)))
    return rows


def test_lp_one_row_per_point(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "p_grid": [2], "n_points": 1})
    rep = run_experiment(cfg)
    assert len(rep.rows) == 1
    csv_path, json_path = rep.write(tmp_path / "r")
    _check_rows_consistent(csv_path)
    summary = json.loads(json_path.read_text())
    assert summary["n_rows"] == 1 and "zeta0_calibrated" in summary


def test_lp_grid_rows_and_rerun_identical(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "p_grid": [1, 2, "inf"]})
    a = run_experiment(cfg)
    a.write(tmp_path / "a")
    rows = _check_rows_consistent(tmp_path / "a.csv")
    assert len(rows) == 12
    assert [r["point_id"] for r in rows] == [str(i) for i in range(4) for _ in range(3)]
    run_experiment(ExperimentConfig.from_dict(cfg.to_dict())).write(tmp_path / "b")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    c = ExperimentConfig.from_dict({**cfg.to_dict(), "workers": 3})
    run_experiment(c).write(tmp_path / "c")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_gaussian_white_and_rejection(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "experiment": "gaussian"})
    rep = run_experiment(cfg)
    rep.write(tmp_path / "g")
    _check_rows_consistent(tmp_path / "g.csv")
    assert rep.summary["band_over_sqrt_d"] == [B.gaussian_zeta1(0.15), B.gaussian_zeta2(0.15)]
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gaussian", epsilon=1 / 3)
    with pytest.raises(ConfigError):
        ExperimentConfig(epsilon=0.0)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig(p_grid=(0.5,))


def test_gaussian_signal_whiteness_table():
    cfg = ExperimentConfig.from_dict({"experiment": "gaussian", "noise": "signal", "n_points": 6,
                                      "n_train": 150, "n_samples": 1000, "epochs": 100,
                                      "threshold": 30.0})
    rep = run_experiment(cfg)
    table = rep.summary["whiteness_table"]
    assert sum(t["count"] for t in table) == len(rep.rows)
    assert rep.summary["n_skipped"] + len(rep.rows) == 6


def test_quantization_huge_margin(tmp_path):
    model = LinearModel(np.ones(256) / 256, -1e4)
    save_model(model, tmp_path / "m.json")
    cfg = ExperimentConfig.from_dict({"experiment": "quantization", "model": str(tmp_path / "m.json"),
                                      "n_points": 5, "n_train": 10})
    rep = run_experiment(cfg)
    assert [r["radius"] for r in rep.rows] == [1] * 5
    assert all("log2_r_star=" in r["extra"] for r in rep.rows)
