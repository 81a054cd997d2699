"""Desk-scale experiment pipelines and their CSV/JSON reports.

Each pipeline builds (or loads) a dataset and a model, processes test points
independently and writes one report row per (point, noise setting).  Bounds in
the report are in absolute radius units, i.e. ratio bounds times ``||r*||``.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bounds as B
from .datasets import ingest_dataset, make_blob_images, make_blobs
from .geometry import min_perturbation
from .models import (LinearModel, MulticlassLinearModel, TrainConfig, label, load_model,
                     train_logistic, train_mlp)
from .noise import CovarianceSpec, GaussianNoise, LpNoise, parse_p, signal_dependent_sigma
from .quantize import min_bits_preserving_label
from .robustness import Bisection, Grid, RobustnessQuery, robustness_radius

REPORT_COLUMNS = ["point_id", "p_or_sigma", "eps", "r_star", "radius", "lower", "upper",
                  "estimate", "within_bounds", "extra"]
DEFAULT_P_GRID = (1.0, 1.5, 2.0, 3.0, 5.0, math.inf)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "lp"
    dataset: dict = field(default_factory=dict)
    model: str | None = None
    model_kind: str = "auto"
    p_grid: tuple = DEFAULT_P_GRID
    epsilon: float | None = None
    n_samples: int = 10_000
    seed: int = 0
    n_points: int = 100
    n_train: int = 2000
    constants: B.BoundConstants = field(default_factory=B.BoundConstants)
    noise: str = "white"
    threshold: float = 0.0
    gamma: float = 0.0
    eta: float = math.inf
    dither: bool = True
    hidden: tuple = (16,)
    epochs: int = 500
    learning_rate: float = 0.1
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in ("lp", "gaussian", "quantization"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        try:
            self.p_grid = tuple(parse_p(p) for p in self.p_grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.epsilon is None:
            self.epsilon = 0.15 if self.experiment == "gaussian" else 0.015
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.experiment == "gaussian" and self.epsilon >= B.GAUSSIAN_EPS0:
            raise ConfigError("Gaussian bounds need epsilon < 1/3")
        if self.noise not in ("white", "signal"):
            raise ConfigError("noise must be 'white' or 'signal'")
        if self.n_points < 1 or self.n_samples < 100:
            raise ConfigError("need n_points >= 1 and n_samples >= 100")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if isinstance(self.constants, dict):
            self.constants = B.BoundConstants.from_dict(self.constants)
        self.hidden = tuple(int(h) for h in self.hidden)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "p_grid" in doc:
            doc["p_grid"] = tuple(doc["p_grid"])
        if "eta" in doc:
            doc["eta"] = float(doc["eta"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["constants"] = self.constants.to_dict()
        out["p_grid"] = ["inf" if math.isinf(p) else p for p in self.p_grid]
        out["hidden"] = list(self.hidden)
        out["eta"] = "inf" if math.isinf(self.eta) else self.eta
        return out


@dataclass
class ExperimentReport:
    rows: list[dict]
    summary: dict

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, REPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: _fmt(r[k]) for k in REPORT_COLUMNS})

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n")

    def write(self, output) -> tuple[Path, Path]:
        """Write ``<output>.csv`` and ``<output>.json``."""
        base = Path(output)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
        self.write_csv(csv_path)
        self.write_summary(json_path)
        return csv_path, json_path


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return "" if v is None else str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def p_label(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def point_seed(seed: int, point: int, setting: int) -> int:
    """Independent integer seed for one (point, setting) pair."""
    return int(np.random.SeedSequence([seed, point, setting]).generate_state(1, np.uint64)[0])


def _map_points(fn, n: int, workers: int):
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, range(n)))


# ---------------------------------------------------------- data + model ---

def _default_dataset(config: ExperimentConfig) -> dict:
    if config.experiment == "lp":
        return {"kind": "blobs", "d": 400, "separation": 6.0, "classes": 2}
    if config.experiment == "gaussian":
        if config.noise == "signal":
            return {"kind": "blob_images", "classes": 2}
        return {"kind": "blobs", "d": 400, "separation": 6.0, "classes": 2}
    return {"kind": "blob_images", "classes": 3}


def build_dataset(config: ExperimentConfig):
    """Return ``(train, test)`` datasets for a config."""
    spec = {**_default_dataset(config), **config.dataset}
    kind = spec.get("kind", "blobs")
    n = config.n_train + config.n_points
    seed = int(spec.get("seed", config.seed))
    if kind == "blobs":
        data = make_blobs(int(spec.get("d", 400)), n, float(spec.get("separation", 6.0)),
                          seed, int(spec.get("classes", 2)))
    elif kind == "blob_images":
        data = make_blob_images(n, seed, int(spec.get("classes", 3)), int(spec.get("side", 16)))
    elif kind == "file":
        data = ingest_dataset(spec["path"], spec.get("format", "auto"), spec.get("labels"))
        if "test_path" in spec:
            test = ingest_dataset(spec["test_path"], spec.get("format", "auto"),
                                  spec.get("test_labels"), data.n_classes)
            return data, test.subset(slice(0, config.n_points))
        if len(data) <= config.n_points:
            return data, data
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    return data.subset(slice(0, len(data) - config.n_points)), \
        data.subset(slice(len(data) - config.n_points, len(data)))


def build_model(config: ExperimentConfig, train):
    if config.model:
        return load_model(config.model)
    kind = config.model_kind
    if kind == "auto":
        kind = "mlp" if config.experiment == "quantization" else "logistic"
    tc = TrainConfig(learning_rate=config.learning_rate, epochs=config.epochs,
                     seed=config.seed, hidden=config.hidden)
    if kind == "logistic":
        return train_logistic(train, tc).model
    if kind == "mlp":
        return train_mlp(train, tc).model
    raise ConfigError(f"unknown model kind {kind!r}")


def _is_linear(model) -> bool:
    return isinstance(model, (LinearModel, MulticlassLinearModel))


def _normal_at_boundary(model, x, adv):
    """Hyperplane normal for the bounds: ``w`` for linear models, the gradient at
    ``x + r*`` otherwise."""
    if isinstance(model, LinearModel):
        return model.w
    k = label(model, x)
    if isinstance(model, MulticlassLinearModel):
        return model.W[k] - model.W[adv.target_class]
    pair = None if getattr(model, "binary", False) else (k, adv.target_class)
    if pair is None:
        return model.gradient(x + adv.r_star)
    return model.gradient(x + adv.r_star, pair)


def _search_for(model, start: float):
    start = max(start, 1e-12)
    if _is_linear(model):
        return Bisection(0.0, start, 1e-4)
    return Grid(0.0, start, 50, 2)


# -------------------------------------------------------------------- lp ---

def lp_rows_for_point(model, x, pid: int, config: ExperimentConfig) -> list[dict]:
    rows = []
    d = model.d
    for si, p in enumerate(config.p_grid):
        row = {"point_id": pid, "p_or_sigma": p_label(p), "eps": config.epsilon}
        adv = min_perturbation(model, x, p)
        r = adv.norm
        normal = _normal_at_boundary(model, x, adv)
        if _is_linear(model) and not isinstance(model, MulticlassLinearModel):
            rep = B.lp_bounds(normal, p, config.epsilon, config.constants)
        elif isinstance(model, MulticlassLinearModel):
            rep = B.multiclass_lp_bounds(model, x, p, config.epsilon, config.constants)
        else:
            rep = B.laf_lp_bounds(normal, p, config.epsilon, config.gamma, config.eta, r,
                                  config.constants)
        est = B.robustness_estimate(p, d, r, config.constants.zeta0)
        q = RobustnessQuery(x, LpNoise(p), config.epsilon, config.n_samples,
                            point_seed(config.seed, pid, si), _search_for(model, est))
        res = robustness_radius(model, q)
        lo, hi = rep.lower * r, rep.upper * r
        row.update(r_star=r, radius=res.radius, lower=lo, upper=hi, estimate=est,
                   within_bounds=bool(res.finite and lo <= res.radius <= hi),
                   extra=f"factor={rep.factor!r};valid={int(rep.valid)};"
                         f"p_hat={res.p_hat_at_radius!r};converged={int(adv.converged)}")
        rows.append(row)
    return rows


def _lp_summary(rows, config: ExperimentConfig, d: int) -> dict:
    finite = [r for r in rows if math.isfinite(r["radius"])]
    summary = {"experiment": "lp", "d": d, "n_points": config.n_points,
               "epsilon": config.epsilon, "n_samples": config.n_samples,
               "constants": config.constants.to_dict(), "n_rows": len(rows),
               "n_infinite": len(rows) - len(finite)}
    if not finite:
        return summary
    summary["within_bounds_rate"] = sum(r["within_bounds"] for r in finite) / len(finite)
    pairs = [(r["radius"], parse_p(r["p_or_sigma"]), d, r["r_star"]) for r in finite]
    z = B.calibrate_zeta0(pairs)
    summary["zeta0_calibrated"] = z
    rel = [abs(B.robustness_estimate(p, d, rs, z) - rad) / rad for rad, p, _, rs in pairs]
    summary["estimate_within_30pct_rate"] = float(np.mean(np.array(rel) <= 0.30))
    per_p = {}
    for p in config.p_grid:
        sel = [r for r in finite if r["p_or_sigma"] == p_label(p)]
        if not sel:
            continue
        ratios = np.array([r["radius"] / r["r_star"] for r in sel])
        est = np.array([B.robustness_estimate(p, d, r["r_star"], z) / r["r_star"] for r in sel])
        per_p[p_label(p)] = {
            "median_ratio": float(np.median(ratios)),
            "median_ratio_over_sqrt_d": float(np.median(ratios) / math.sqrt(d)),
            "calibrated_estimate_ratio": float(est[0]),
            "within_bounds_rate": float(np.mean([r["within_bounds"] for r in sel])),
            "estimate_within_30pct_rate": float(np.mean(np.abs(est - ratios) / ratios <= 0.30)),
        }
    summary["per_p"] = per_p
    return summary


def run_lp_experiment(config: ExperimentConfig) -> ExperimentReport:
    train, test = build_dataset(config)
    model = build_model(config, train)
    per_point = _map_points(lambda i: lp_rows_for_point(model, test.X[i], i, config),
                            len(test), config.workers)
    rows = [r for pr in per_point for r in pr]
    return ExperimentReport(rows, _lp_summary(rows, config, model.d))


def calibrate_lp_constants(config: ExperimentConfig, slack: float = 0.05) -> B.BoundConstants:
    """Fit ``C0, c0`` on a calibration run.

    The run uses the config as given (callers pass a different seed than the
    evaluation run), collects ``(radius / ||r*||) / lp_factor`` for every
    finite (point, p) pair, and hands them to :func:`bounds.calibrate_constants`.
    ``zeta0`` is refitted on the same run.
    """
    rep = run_lp_experiment(config)
    q, pairs = [], []
    for r in rep.rows:
        if not math.isfinite(r["radius"]):
            continue
        factor = float(r["extra"].split(";")[0].split("=")[1])
        q.append(r["radius"] / r["r_star"] / factor)
        pairs.append((r["radius"], parse_p(r["p_or_sigma"]), rep.summary["d"], r["r_star"]))
    zeta0 = B.calibrate_zeta0(pairs)
    return B.calibrate_constants(q, config.epsilon, slack, zeta0)


# -------------------------------------------------------------- Gaussian ---

def gaussian_rows_for_point(model, x, pid: int, config: ExperimentConfig,
                            white: CovarianceSpec | None) -> dict | None:
    adv = min_perturbation(model, x, 2)
    r = adv.norm
    normal = _normal_at_boundary(model, x, adv)
    if config.noise == "white":
        sigma, whiteness, tag = white, float("nan"), "white"
    else:
        try:
            sd = signal_dependent_sigma(x, config.threshold)
        except ValueError:
            return None
        sigma, whiteness, tag = sd.sigma, sd.whiteness, "signal"
    try:
        if _is_linear(model):
            rep = B.gaussian_bounds(normal, sigma, config.epsilon)
        else:
            rep = B.laf_gaussian_bounds(normal, sigma, config.epsilon, config.gamma,
                                        config.eta, r)
    except ValueError:
        return None
    d = model.d
    q = RobustnessQuery(x, GaussianNoise(sigma, tag), config.epsilon, config.n_samples,
                        point_seed(config.seed, pid, 0), _search_for(model, rep.factor * r))
    res = robustness_radius(model, q)
    lo, hi = rep.lower * r, rep.upper * r
    return {"point_id": pid, "p_or_sigma": tag, "eps": config.epsilon, "r_star": r,
            "radius": res.radius, "lower": lo, "upper": hi,
            "estimate": rep.factor * r,
            "within_bounds": bool(res.finite and lo <= res.radius <= hi),
            "extra": f"ratio={res.radius / r!r};factor={rep.factor!r};"
                     f"ratio_over_sqrt_d={res.radius / r / math.sqrt(d)!r};"
                     f"whiteness={whiteness!r}"}


def whiteness_table(rows, bins: int = 10) -> list[dict]:
    """Mean robustness ratio per whiteness bin (equal-count bins)."""
    pts = []
    for r in rows:
        kv = dict(t.split("=") for t in r["extra"].split(";"))
        w, ratio = float(kv["whiteness"]), float(kv["ratio"])
        if math.isfinite(w) and math.isfinite(ratio):
            pts.append((w, ratio))
    if not pts:
        return []
    pts.sort()
    out = []
    for chunk in np.array_split(np.array(pts), min(bins, len(pts))):
        out.append({"whiteness_min": float(chunk[0, 0]), "whiteness_max": float(chunk[-1, 0]),
                    "whiteness_mean": float(chunk[:, 0].mean()),
                    "mean_ratio": float(chunk[:, 1].mean()), "count": int(len(chunk))})
    return out


def run_gaussian_experiment(config: ExperimentConfig) -> ExperimentReport:
    train, test = build_dataset(config)
    model = build_model(config, train)
    white = CovarianceSpec.white(model.d) if config.noise == "white" else None
    results = _map_points(lambda i: gaussian_rows_for_point(model, test.X[i], i, config, white),
                          len(test), config.workers)
    rows = [r for r in results if r is not None]
    d = model.d
    finite = [r for r in rows if math.isfinite(r["radius"])]
    ratios = np.array([r["radius"] / r["r_star"] for r in finite])
    z1, z2 = B.gaussian_zeta1(config.epsilon), B.gaussian_zeta2(config.epsilon)
    summary = {"experiment": "gaussian", "noise": config.noise, "d": d,
               "epsilon": config.epsilon, "n_samples": config.n_samples,
               "n_points": len(test), "n_skipped": len(test) - len(rows),
               "n_infinite": len(rows) - len(finite),
               "band_over_sqrt_d": [z1, z2]}
    if finite:
        summary["within_bounds_rate"] = float(np.mean([r["within_bounds"] for r in finite]))
        summary["median_ratio_over_sqrt_d"] = float(np.median(ratios) / math.sqrt(d))
        summary["white_band_rate"] = float(np.mean(
            (ratios >= z1 * math.sqrt(d)) & (ratios <= z2 * math.sqrt(d))))
    if config.noise == "signal":
        summary["whiteness_table"] = whiteness_table(rows)
    return ExperimentReport(rows, summary)


# ---------------------------------------------------------- quantization ---

def quantization_row(model, x, pid: int, config: ExperimentConfig) -> dict:
    rep = min_bits_preserving_label(model, x, config.dither, point_seed(config.seed, pid, 0),
                                    config.constants.zeta0)
    depth = rep.predicted_depth
    return {"point_id": pid, "p_or_sigma": "inf", "eps": None, "r_star": rep.r_star_inf,
            "radius": rep.measured_bits, "lower": depth - 1, "upper": depth + 1,
            "estimate": rep.predicted_bits, "within_bounds": rep.agreed_within_one_bit,
            "extra": f"log2_r_star={math.log2(rep.r_star_inf)!r};"
                     f"levels={rep.predicted_levels!r};predicted_depth={depth}"}


def run_quantization_experiment(config: ExperimentConfig) -> ExperimentReport:
    train, test = build_dataset(config)
    model = build_model(config, train)
    rows = _map_points(lambda i: quantization_row(model, test.X[i], i, config),
                       len(test), config.workers)
    measured = np.array([r["radius"] for r in rows])
    summary = {"experiment": "quantization", "d": model.d, "n_points": len(rows),
               "dither": config.dither, "zeta0": config.constants.zeta0,
               "agreement_rate": float(np.mean([r["within_bounds"] for r in rows])),
               "measured_bits_histogram": {int(b): int((measured == b).sum())
                                           for b in np.unique(measured)},
               "test_accuracy": float(np.mean(model.predict(test.X) == test.y))}
    return ExperimentReport(rows, summary)


RUNNERS = {"lp": run_lp_experiment, "gaussian": run_gaussian_experiment,
           "quantization": run_quantization_experiment}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[config.experiment](config)
