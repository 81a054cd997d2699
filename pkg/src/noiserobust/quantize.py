"""Uniform image quantization and the minimal label-preserving bit depth."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import quantization_prediction
from .geometry import min_perturbation
from .models import as_vector, label
from .noise import rng_stream

MAX_BITS = 8
SENTINEL_BITS = 9


def quantize_image(x, bits: int, dither: bool = False, seed: int = 0) -> np.ndarray:
    """Mid-tread uniform quantizer with ``2**bits`` levels on ``[0, 255]``.

    With ``dither`` a seeded uniform offset on ``[-step/2, step/2)`` is added
    before snapping.  Inputs (and dithered values) outside ``[0, 255]`` are
    clamped; inputs out of range also raise a ``RuntimeWarning``.
    """
    bits = int(bits)
    if not 1 <= bits <= MAX_BITS:
        raise ValueError(f"bits must lie in [1, {MAX_BITS}], got {bits}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("image has non-finite values")
    if x.size and (x.min() < 0 or x.max() > 255):
        warnings.warn("pixel values outside [0, 255] were clamped", RuntimeWarning, stacklevel=2)
        x = np.clip(x, 0.0, 255.0)
    step = 255.0 / (2 ** bits - 1)
    if dither:
        x = x + rng_stream(seed, 0).uniform(-step / 2, step / 2, x.shape)
    top = 2 ** bits - 1
    k = np.clip(np.rint(x / step), 0, top)
    return k * 255.0 / top + 0.0  # exact 255.0 on the top level; no -0.0


@dataclass
class QuantizationReport:
    predicted_bits: float
    predicted_levels: float
    measured_bits: int
    r_star_inf: float
    agreed_within_one_bit: bool

    @property
    def predicted_depth(self) -> int:
        return int(min(MAX_BITS, max(1, math.ceil(self.predicted_bits))))


def min_bits_preserving_label(model, x, dither: bool = False, seed: int = 0,
                              zeta0: float = 0.72, **adv_kwargs) -> QuantizationReport:
    """Scan depths 1..8 and return the first whose quantized image keeps the label.

    Depth 9 means even 8 bits change the label.  The prediction uses the
    linf adversarial distance from the geometry module.
    """
    x = as_vector(x, model.d)
    k = label(model, x)
    measured = SENTINEL_BITS
    for b in range(1, MAX_BITS + 1):
        if label(model, quantize_image(x, b, dither, seed)) == k:
            measured = b
            break
    adv = min_perturbation(model, x, np.inf, **adv_kwargs)
    pred = quantization_prediction(adv.norm, model.d, zeta0)
    return QuantizationReport(pred.bits, pred.levels, measured, adv.norm,
                              abs(pred.depth - measured) <= 1)
