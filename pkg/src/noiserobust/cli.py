"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as B
from .datasets import (DataFormatError, ingest_dataset, make_blob_images, make_blobs,
                       write_dataset_csv, write_idx_images, write_idx_labels)
from .experiments import (ConfigError, ExperimentConfig, calibrate_lp_constants,
                          read_report_csv, run_experiment)
from .geometry import min_perturbation
from .models import DimensionError, TrainConfig, load_model, save_model, train_logistic, train_mlp
from .noise import (CovarianceSpec, GaussianNoise, LpNoise, parse_p, read_matrix, rng_stream,
                    write_matrix_bin, write_matrix_csv)
from .quantize import min_bits_preserving_label, quantize_image
from .robustness import Bisection, Grid, RobustnessQuery, robustness_radius

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _emit(obj) -> None:
    print(json.dumps(_clean(obj), indent=2, sort_keys=True))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else None))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG) from None
    if not isinstance(doc, dict):
        raise CliError("config must be a JSON object", EXIT_CONFIG)
    return doc


def _merge(args, keys) -> dict:
    """Flags that were given, overridden by the ``--config`` document."""
    out = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    out.update(_load_config(getattr(args, "config", None)))
    return out


def _need(opts: dict, key: str):
    if opts.get(key) is None:
        raise CliError(f"missing required option --{key.replace('_', '-')}", EXIT_CONFIG)
    return opts[key]


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise CliError(f"bad vector {text!r}: {exc}", EXIT_CONFIG) from None


def _point(opts: dict, d: int | None = None) -> np.ndarray:
    if opts.get("point") is not None:
        x = opts["point"]
        x = _vector(x) if isinstance(x, str) else np.asarray(x, dtype=float)
    elif opts.get("data") is not None:
        data = ingest_dataset(opts["data"])
        i = int(opts.get("index") or 0)
        if not 0 <= i < len(data):
            raise CliError(f"index {i} out of range for {len(data)} points", EXIT_CONFIG)
        x = data.X[i]
    else:
        raise CliError("give --point or --data/--index", EXIT_CONFIG)
    if d is not None and x.size != d:
        raise CliError(f"point has dimension {x.size}, model expects {d}", EXIT_DATA)
    return x


def _constants(opts: dict) -> B.BoundConstants:
    c = opts.get("constants")
    if c is None:
        return B.BoundConstants()
    if isinstance(c, dict):
        return B.BoundConstants.from_dict(c)
    doc = _load_config(c)
    return B.BoundConstants.from_dict(doc.get("constants", doc))


def _noise(opts: dict, d: int):
    kind = opts.get("noise", "lp")
    if kind == "lp":
        return LpNoise(parse_p(opts.get("p", 2)))
    if kind == "gaussian":
        if opts.get("sigma"):
            sig = CovarianceSpec(read_matrix(opts["sigma"]))
            if sig.d != d:
                raise CliError(f"covariance is {sig.d}x{sig.d}, expected {d}", EXIT_DATA)
            return GaussianNoise(sig, "file")
        return GaussianNoise(CovarianceSpec.white(d), "white")
    raise CliError(f"unknown noise {kind!r}", EXIT_CONFIG)


# ------------------------------------------------------------- commands ---

def cmd_sample(args) -> int:
    o = _merge(args, ["noise", "p", "d", "n", "seed", "sigma", "out"])
    d, n = int(o.get("d", 2)), int(o.get("n", 10))
    V = _noise(o, d).sample(d, n, rng_stream(int(o.get("seed", 0)), 0))
    out = o.get("out")
    if out is None:
        np.savetxt(sys.stdout, V, delimiter=",", fmt="%.17g")
    elif str(out).endswith(".bin"):
        write_matrix_bin(out, V)
    else:
        write_matrix_csv(out, V)
    return EXIT_OK


def cmd_dataset(args) -> int:
    o = _merge(args, ["kind", "d", "n", "separation", "seed", "classes", "out", "format"])
    kind, n, seed = o.get("kind", "blobs"), int(o.get("n", 100)), int(o.get("seed", 0))
    if kind == "blobs":
        data = make_blobs(int(o.get("d", 20)), n, float(o.get("separation", 6.0)), seed,
                          int(o.get("classes", 2)))
    elif kind == "blob-images":
        data = make_blob_images(n, seed, int(o.get("classes", 3)))
    else:
        raise CliError(f"unknown dataset kind {kind!r}", EXIT_CONFIG)
    out = o.get("out") or "dataset.csv"
    if o.get("format", "csv") == "idx":
        side = int(round(math.sqrt(data.d)))
        if side * side != data.d:
            raise CliError("IDX output needs square images", EXIT_CONFIG)
        write_idx_images(out, data.X.reshape(len(data), side, side))
        write_idx_labels(str(out) + ".labels", data.y)
    else:
        write_dataset_csv(out, data)
    return EXIT_OK


def cmd_train(args) -> int:
    o = _merge(args, ["data", "labels", "kind", "epochs", "learning_rate", "seed", "hidden", "out"])
    data = ingest_dataset(_need(o, "data"), labels_path=o.get("labels"))
    hidden = o.get("hidden", "16")
    hidden = tuple(int(h) for h in str(hidden).split(",")) if not isinstance(hidden, list) else tuple(hidden)
    tc = TrainConfig(learning_rate=float(o.get("learning_rate", 0.1)),
                     epochs=int(o.get("epochs", 500)), seed=int(o.get("seed", 0)), hidden=hidden)
    res = (train_mlp if o.get("kind", "logistic") == "mlp" else train_logistic)(data, tc)
    save_model(res.model, o.get("out") or "model.json")
    _emit({"accuracy": res.accuracy, "final_loss": res.losses[-1] if res.losses else None})
    return EXIT_OK


def cmd_adversarial(args) -> int:
    o = _merge(args, ["model", "point", "data", "index", "p"])
    model = load_model(_need(o, "model"))
    x = _point(o, model.d)
    adv = min_perturbation(model, x, parse_p(o.get("p", 2)))
    _emit({"norm": adv.norm, "p": adv.p, "target_class": adv.target_class,
           "iterations": adv.iterations, "converged": adv.converged, "r_star": adv.r_star})
    return EXIT_OK


def cmd_radius(args) -> int:
    o = _merge(args, ["model", "point", "data", "index", "noise", "p", "sigma", "eps",
                      "n_samples", "seed", "search", "alpha_hi", "workers"])
    model = load_model(_need(o, "model"))
    x = _point(o, model.d)
    hi = float(o.get("alpha_hi", 1.0))
    search = Grid(0.0, hi) if o.get("search") == "grid" else Bisection(0.0, hi)
    try:
        q = RobustnessQuery(x, _noise(o, model.d), float(o.get("eps", 0.015)),
                            int(o.get("n_samples", 10_000)), int(o.get("seed", 0)), search,
                            int(o.get("workers", 1)))
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    res = robustness_radius(model, q)
    _emit({"radius": res.radius, "p_hat_at_radius": res.p_hat_at_radius,
           "wilson_ci": res.wilson_ci, "evaluations": len(res.trace)})
    return EXIT_OK


def cmd_bounds(args) -> int:
    o = _merge(args, ["type", "w", "p", "eps", "d", "r_star", "gamma", "eta", "sigma",
                      "t", "constants", "model", "point"])
    kind = o.get("type", "lp")
    C = _constants(o)
    eps = float(o.get("eps", 0.015))
    if kind == "estimate":
        est = B.robustness_estimate(o.get("p", 2), int(_need(o, "d")), float(_need(o, "r_star")), C.zeta0)
        _emit({"estimate": est})
        return EXIT_OK
    if kind == "quantization":
        q = B.quantization_prediction(float(_need(o, "r_star")), int(_need(o, "d")), C.zeta0)
        _emit({"delta": q.delta, "levels": q.levels, "bits": q.bits, "depth": q.depth})
        return EXIT_OK
    if kind == "multiclass":
        model = load_model(_need(o, "model"))
        rep = B.multiclass_lp_bounds(model, _point(o, model.d), o.get("p", 2), eps, C)
        _emit(vars(rep))
        return EXIT_OK
    w = _need(o, "w")
    w = _vector(w) if isinstance(w, str) else np.asarray(w, dtype=float)
    sigma = (CovarianceSpec(read_matrix(_need(o, "sigma"))) if o.get("sigma")
             else CovarianceSpec.white(w.size))
    if kind == "tail":
        t2, pb = B.gaussian_factor_tail_bound(w.size, sigma, float(_need(o, "t")))
        _emit({"t_prime": t2, "prob_bound": pb})
        return EXIT_OK
    gamma, eta = float(o.get("gamma", 0.0)), float(o.get("eta", math.inf))
    r = float(o.get("r_star", 1.0))
    if kind == "lp":
        rep = B.lp_bounds(w, o.get("p", 2), eps, C, bool(o.get("alt_lower", False)))
    elif kind == "gaussian":
        rep = B.gaussian_bounds(w, sigma, eps)
    elif kind == "laf-lp":
        rep = B.laf_lp_bounds(w, o.get("p", 2), eps, gamma, eta, r, C)
    elif kind == "laf-gaussian":
        rep = B.laf_gaussian_bounds(w, sigma, eps, gamma, eta, r)
    else:
        raise CliError(f"unknown bound type {kind!r}", EXIT_CONFIG)
    _emit(vars(rep))
    return EXIT_OK


def cmd_quantize(args) -> int:
    o = _merge(args, ["point", "data", "index", "bits", "dither", "seed", "model", "out"])
    x = _point(o)
    seed = int(o.get("seed", 0))
    if o.get("model"):
        model = load_model(_need(o, "model"))
        rep = min_bits_preserving_label(model, x, bool(o.get("dither")), seed)
        _emit(vars(rep) | {"predicted_depth": rep.predicted_depth})
        return EXIT_OK
    q = quantize_image(x, int(o.get("bits", 8)), bool(o.get("dither")), seed)
    if o.get("out"):
        write_matrix_csv(_need(o, "out"), q[None, :])
    else:
        print(",".join(repr(float(v)) for v in q))
    return EXIT_OK


EXPERIMENT_KEYS = ["p_grid", "epsilon", "n_samples", "seed", "n_points", "n_train", "model",
                   "model_kind", "noise", "threshold", "gamma", "eta", "workers", "output",
                   "constants", "data"]


def _experiment_config(args, experiment: str) -> ExperimentConfig:
    o = _merge(args, EXPERIMENT_KEYS)
    if isinstance(o.get("p_grid"), str):
        o["p_grid"] = [t for t in o["p_grid"].split(",") if t]
    if "constants" in o and not isinstance(o["constants"], dict):
        o["constants"] = _constants(o)
    if "data" in o:
        o["dataset"] = {"kind": "file", "path": o.pop("data")}
    if getattr(args, "no_dither", False):
        o["dither"] = False
    o["experiment"] = experiment
    try:
        return ExperimentConfig.from_dict(o)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def cmd_experiment(args) -> int:
    config = _experiment_config(args, args.experiment)
    rep = run_experiment(config)
    out = config.output or f"{config.experiment}_report"
    csv_path, json_path = rep.write(out)
    _emit({"report": str(csv_path), "summary": str(json_path), **rep.summary})
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.report:
        rows = read_report_csv(args.report)
        d = int(args.d) if args.d else None
        if d is None:
            raise CliError("--d is required with --report", EXIT_CONFIG)
        pairs = [(float(r["radius"]), parse_p(r["p_or_sigma"]), d, float(r["r_star"]))
                 for r in rows if r["radius"] not in ("", "inf")]
        _emit({"zeta0": B.calibrate_zeta0(pairs)})
        return EXIT_OK
    config = _experiment_config(args, "lp")
    const = calibrate_lp_constants(config, float(args.slack))
    doc = {"constants": const.to_dict(), "eps0": const.eps0, "calibration_seed": config.seed}
    if config.output:
        Path(config.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _emit(doc)
    return EXIT_OK


# --------------------------------------------------------------- parser ---

def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file; its keys override flags")
    p.add_argument("--p-grid", dest="p_grid", help="comma list, e.g. 1,2,inf")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--model", help="model JSON (trained on the fly if omitted)")
    p.add_argument("--model-kind", dest="model_kind", choices=["auto", "logistic", "mlp"])
    p.add_argument("--data", help="dataset file (CSV or IDX) instead of synthetic data")
    p.add_argument("--noise", choices=["white", "signal"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--constants", help="JSON file with C0, c0, zeta0")
    p.add_argument("--output", help="report path stem (writes .csv and .json)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noiserobust",
                                 description="Random-noise robustness of classifiers.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw noise directions")
    p.add_argument("--noise", choices=["lp", "gaussian"])
    p.add_argument("--p")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", help="covariance matrix (CSV or NCMAT1 binary)")
    p.add_argument("--out", help="output matrix (.bin for binary, else CSV)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dataset", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=["blobs", "blob-images"])
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--classes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv", "idx"])
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train a logistic or MLP model")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", help="IDX label file")
    p.add_argument("--kind", choices=["logistic", "mlp"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--hidden", help="comma list of hidden widths")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    for name, fn, hlp in (("adversarial", cmd_adversarial, "minimal lp perturbation"),
                          ("radius", cmd_radius, "Monte-Carlo robustness radius")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--model", required=True)
        p.add_argument("--point", help="comma-separated coordinates")
        p.add_argument("--data")
        p.add_argument("--index", type=int)
        p.add_argument("--p")
        p.add_argument("--config")
        if name == "radius":
            p.add_argument("--noise", choices=["lp", "gaussian"])
            p.add_argument("--sigma")
            p.add_argument("--eps", type=float)
            p.add_argument("--n-samples", dest="n_samples", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--search", choices=["bisection", "grid"])
            p.add_argument("--alpha-hi", dest="alpha_hi", type=float)
            p.add_argument("--workers", type=int)
        p.set_defaults(func=fn)

    p = sub.add_parser("bounds", help="closed-form bounds and estimates")
    p.add_argument("--type", choices=["lp", "gaussian", "laf-lp", "laf-gaussian", "multiclass",
                                      "estimate", "quantization", "tail"])
    p.add_argument("--w", help="comma-separated normal vector")
    p.add_argument("--p")
    p.add_argument("--eps", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--r-star", dest="r_star", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--sigma")
    p.add_argument("--t", type=float)
    p.add_argument("--model")
    p.add_argument("--point")
    p.add_argument("--constants")
    p.add_argument("--config")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("quantize", help="quantize an image or find its minimal bit depth")
    p.add_argument("--point")
    p.add_argument("--data")
    p.add_argument("--index", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--dither", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", help="with a model, report the minimal label-preserving depth")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("experiment", help="run a desk-scale experiment")
    p.add_argument("experiment", choices=["lp", "gaussian", "quantization"])
    _experiment_flags(p)
    p.add_argument("--no-dither", dest="no_dither", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("calibrate", help="fit C0, c0 and zeta0 on a calibration run")
    _experiment_flags(p)
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--report", help="fit zeta0 only, from an existing lp report CSV")
    p.add_argument("--d", type=int, help="dimension (with --report)")
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, DimensionError, OSError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
