"""Robustness of classifiers to random uniform-lp and Gaussian noise."""
from .bounds import (BoundConstants, BoundReport, asymptotic_factor, calibrate_constants,
                     calibrate_zeta0, gaussian_bounds, gaussian_factor,
                     gaussian_factor_tail_bound, laf_gaussian_bounds, laf_lp_bounds, lp_bounds,
                     lp_factor, multiclass_lp_bounds, quantization_prediction,
                     robustness_estimate)
from .datasets import ingest_dataset, make_blob_images, make_blobs
from .geometry import (AdversarialResult, iterative_min_perturbation, linear_min_perturbation,
                       min_perturbation, multiclass_linear_min_perturbation)
from .models import (Dataset, LinearModel, MlpModel, MulticlassLinearModel, TrainConfig,
                     gradient, label, load_model, save_model, train_logistic, train_mlp)
from .noise import (CovarianceSpec, GaussianNoise, LpNoise, rng_stream, sample_gaussian,
                    sample_lp_ball, signal_dependent_sigma)
from .quantize import QuantizationReport, min_bits_preserving_label, quantize_image
from .robustness import (Bisection, Grid, RobustnessQuery, RobustnessResult, flip_probability,
                         robustness_radius, wilson_interval)

__version__ = "0.1.0"
