"""Closed-form robustness bounds, the point estimate and the quantization predictor.

All bound functions return ratios ``r_{nu,eps}(x) / ||r*(x)||``; multiply by the
adversarial norm to get radii.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .models import MulticlassLinearModel, as_vector
from .noise import CovarianceSpec, conjugate, lp_norm, parse_p

GAUSSIAN_EPS0 = 1.0 / 3.0


@dataclass(frozen=True)
class BoundConstants:
    """Universal constants of the lp bounds.

    ``C0`` and ``c0`` are the moment constants for linear forms on lp balls;
    their numeric values are not known, so they are calibrated (see
    :func:`calibrate_constants`).  ``zeta0`` scales the point estimate.
    """

    C0: float = 1.0
    c0: float = 1.0
    zeta0: float = 0.72

    def __post_init__(self):
        for name in ("C0", "c0", "zeta0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def C(self) -> float:
        return 1.0 / (math.sqrt(2.0) * self.C0)

    @property
    def c(self) -> float:
        return self.c0 ** 2

    @property
    def c_prime(self) -> float:
        return 512.0 * self.C0 ** 4

    @property
    def C_alt(self) -> float:
        return 1.0 / (2.0 * math.e ** 2 * self.C0 ** 2)

    @property
    def eps0(self) -> float:
        return self.c ** 2 / self.c_prime

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "BoundConstants":
        return cls(**{k: float(doc[k]) for k in ("C0", "c0", "zeta0") if k in doc})


@dataclass
class BoundReport:
    lower: float
    upper: float
    factor: float
    epsilon: float
    valid: bool
    estimate: float | None = None
    eta_required: float | None = None
    zeta1: float | None = None
    zeta2: float | None = None


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    return eps


# --------------------------------------------------------------- factors ---

def lp_factor(w, p) -> float:
    """``d^(1/p) ||w||_{p'} / ||w||_2``."""
    w = as_vector(w)
    p = parse_p(p)
    n2 = float(lp_norm(w, 2))
    if n2 == 0:
        raise ValueError("w must be nonzero")
    dpow = 1.0 if math.isinf(p) else w.size ** (1.0 / p)
    return dpow * float(lp_norm(w, conjugate(p))) / n2


def _gamma_term(p: float) -> float:
    """``(Gamma((2p-1)/(2(p-1))) / sqrt(pi)) ** (1 - 1/p)`` for ``p > 1``."""
    if math.isinf(p):
        return 1.0 / math.sqrt(math.pi)
    a = (2 * p - 1) / (2 * (p - 1))
    return math.exp((1 - 1 / p) * (gammaln(a) - 0.5 * math.log(math.pi)))


def asymptotic_factor(p, d: int) -> float:
    """Almost-sure limit of ``lp_factor(w, p) / sqrt(d)`` for random unit ``w``.

    For ``p = 1`` the quantity grows like ``sqrt(2 ln d)``, which is returned.
    """
    p = parse_p(p)
    if p == 1:
        if d < 2:
            raise ValueError("d must be >= 2")
        return math.sqrt(2.0 * math.log(d))
    return math.sqrt(2.0) * _gamma_term(p)


def robustness_estimate(p, d: int, r_star_norm: float, zeta0: float = 0.72) -> float:
    """Point estimate ``zeta0 sqrt(d) (Gamma(..)/sqrt(pi))^(1-1/p) ||r*||_p``.

    At ``p = 1`` the Gamma term diverges; the finite-``d`` factor
    ``sqrt(2 d ln d)`` replaces ``sqrt(d)`` times it.
    """
    p = parse_p(p)
    if d < 2:
        raise ValueError("d must be >= 2")
    if not r_star_norm > 0:
        raise ValueError("r_star_norm must be positive")
    if p == 1:
        return zeta0 * math.sqrt(2.0 * d * math.log(d)) * r_star_norm
    return zeta0 * math.sqrt(d) * _gamma_term(p) * r_star_norm


def gaussian_factor(w, sigma: CovarianceSpec) -> float:
    """``||w||_2 / ||sqrt(Sigma) w||_2``."""
    w = as_vector(w, sigma.d)
    sw = float(np.linalg.norm(sigma.sqrt @ w))
    nw = float(np.linalg.norm(w))
    if nw == 0:
        raise ValueError("w must be nonzero")
    if sw <= 1e-14 * nw * math.sqrt(max(sigma.eigenvalues.max(), 0.0)):
        raise ValueError("w lies in the null space of Sigma; the factor is unbounded")
    return nw / sw


def gaussian_factor_eigen(w, sigma: CovarianceSpec) -> float:
    """Same factor via ``1 / sqrt(sum_i lambda_i^2 (u_i . w)^2)`` for unit ``w``."""
    w = as_vector(w, sigma.d)
    w = w / np.linalg.norm(w)
    proj = sigma.eigenvectors.T @ w
    return 1.0 / math.sqrt(float(np.sum(sigma.eigenvalues * proj ** 2)))


# ------------------------------------------------------------ lp bounds ---

def zeta1(eps: float, constants: BoundConstants) -> float:
    return constants.C * math.sqrt(eps)


def zeta1_alt(eps: float, p: float, constants: BoundConstants) -> float:
    """Sub-Gaussian lower constant, available for ``p > 1``."""
    p2 = min(p, 2.0)
    return constants.C_alt / math.sqrt(math.log(3.0 / eps)) * (1.0 - 1.0 / p2)


def zeta2(eps: float, constants: BoundConstants) -> float:
    rad = constants.c - math.sqrt(constants.c_prime * eps)
    return 1.0 / math.sqrt(rad) if rad > 0 else math.inf


def lp_bounds(w, p, epsilon: float, constants: BoundConstants | None = None,
              alt_lower: bool = False) -> BoundReport:
    constants = constants or BoundConstants()
    p = parse_p(p)
    eps = _check_eps(epsilon)
    F = lp_factor(w, p)
    z1 = zeta1(eps, constants)
    if alt_lower and p > 1:
        z1 = max(z1, zeta1_alt(eps, p, constants))
    z2 = zeta2(eps, constants)
    valid = eps < constants.eps0 and math.isfinite(z2)
    return BoundReport(z1 * F, z2 * F, F, eps, valid, zeta1=z1, zeta2=z2)


def multiclass_lp_bounds(model: MulticlassLinearModel, x, p, epsilon: float,
                         constants: BoundConstants | None = None) -> BoundReport:
    """Union-bound version for L classes.

    The upper bound uses the class ``j`` reached by the minimal perturbation; the
    lower bound uses ``zeta1(eps / (L - 1))`` and the class minimizing the factor.
    """
    from .geometry import multiclass_linear_min_perturbation

    constants = constants or BoundConstants()
    p = parse_p(p)
    eps = _check_eps(epsilon)
    adv = multiclass_linear_min_perturbation(model, x, p)
    s = model.scores(as_vector(x, model.d))
    k = int(np.argmax(s))
    others = [l for l in range(model.n_classes) if l != k]
    factors = {l: lp_factor(model.W[k] - model.W[l], p) for l in others}
    j_prime = min(others, key=lambda l: (factors[l], l))
    L = model.n_classes
    z1 = zeta1(eps / (L - 1), constants)
    z2 = zeta2(eps, constants)
    F_up = factors[adv.target_class]
    valid = eps < constants.eps0 and math.isfinite(z2)
    return BoundReport(z1 * factors[j_prime], z2 * F_up, F_up, eps, valid,
                       zeta1=z1, zeta2=z2)


def laf_lp_bounds(grad_at_xstar, p, epsilon: float, gamma: float, eta: float,
                  r_star_norm: float, constants: BoundConstants | None = None) -> BoundReport:
    """lp bounds for a (gamma, eta)-locally-approximately-flat boundary.

    ``grad_at_xstar`` plays the role of the hyperplane normal.  ``valid`` also
    requires ``eta`` to cover the radius the upper bound needs.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    base = lp_bounds(grad_at_xstar, p, epsilon, constants)
    eta_req = (1 + gamma) * base.zeta2 * base.factor * r_star_norm
    return BoundReport((1 - gamma) * base.lower, (1 + gamma) * base.upper, base.factor,
                       base.epsilon, base.valid and eta >= eta_req,
                       eta_required=eta_req, zeta1=base.zeta1, zeta2=base.zeta2)


# ------------------------------------------------------ Gaussian bounds ---

def gaussian_zeta1(eps: float) -> float:
    return math.sqrt(1.0 / (2.0 * math.log(1.0 / eps)))


def gaussian_zeta2(eps: float) -> float:
    rad = 1.0 - math.sqrt(3.0 * eps)
    return math.sqrt(1.0 / rad) if rad > 0 else math.inf


def gaussian_bounds(w, sigma: CovarianceSpec, epsilon: float) -> BoundReport:
    eps = _check_eps(epsilon)
    F = gaussian_factor(w, sigma)
    z1, z2 = gaussian_zeta1(eps), gaussian_zeta2(eps)
    return BoundReport(z1 * F, z2 * F, F, eps, eps < GAUSSIAN_EPS0 and math.isfinite(z2),
                       zeta1=z1, zeta2=z2)


def laf_gaussian_bounds(grad_at_xstar, sigma: CovarianceSpec, epsilon: float, gamma: float,
                        eta: float, r_star_norm: float) -> BoundReport:
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    eps = _check_eps(epsilon)
    F = gaussian_factor(grad_at_xstar, sigma)
    z1 = gaussian_zeta1(eps / 2)
    z2 = gaussian_zeta2(3 * eps / 2)
    psi = 8.0 * sigma.trace_of_square * math.log(4.0 / eps)
    eta_req = (1 + gamma) * (1 + psi) * z2 * F * r_star_norm
    valid = eps < GAUSSIAN_EPS0 / 2 and math.isfinite(z2) and eta >= eta_req
    return BoundReport((1 - gamma) * z1 * F, (1 + gamma) * z2 * F, F, eps, valid,
                       eta_required=eta_req, zeta1=z1, zeta2=z2)


def gaussian_factor_tail_bound(d: int, sigma: CovarianceSpec, t: float,
                               allow_out_of_range: bool = False) -> tuple[float, float]:
    """Deviation ``t' = 2.5 t`` and an upper bound on
    ``P{|(||w|| / ||sqrt(Sigma) w||)^2 - d| >= t'}`` for uniform unit ``w``.

    The bound is proven for ``0 < t <= sqrt(pi)/8 d``; outside that range the
    formula can still be evaluated with ``allow_out_of_range=True``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if t > math.sqrt(math.pi) / 8 * d and not allow_out_of_range:
        raise ValueError(f"t must be <= sqrt(pi)/8 * d = {math.sqrt(math.pi) / 8 * d:.4g}")
    tr2 = sigma.trace_of_square
    b = (2 * math.exp(-t * t / (8 * d))
         + 2 * math.exp(-t * t / (8 * d * d * tr2))
         + 2 * math.exp(-1.0 / (200 * tr2)))
    return 2.5 * t, min(1.0, b)


# ---------------------------------------------------------- quantization ---

class QuantizationPrediction(NamedTuple):
    delta: float
    levels: float
    bits: float

    @property
    def depth(self) -> int:
        """Integer bit depth: ``ceil(bits)`` clamped to ``[1, 8]``."""
        if not math.isfinite(self.bits):
            return 1 if self.bits < 0 else 8
        return int(min(8, max(1, math.ceil(self.bits))))


def quantization_prediction(r_star_inf: float, d: int, zeta0: float = 0.72,
                            dynamic_range: float = 255.0) -> QuantizationPrediction:
    """Tolerable step ``(2 zeta0 / sqrt(pi)) sqrt(d) ||r*||_inf`` and the implied
    number of levels and bits."""
    if not r_star_inf > 0:
        raise ValueError("r_star_inf must be positive")
    delta = 2.0 * zeta0 / math.sqrt(math.pi) * math.sqrt(d) * r_star_inf
    levels = dynamic_range / delta
    return QuantizationPrediction(delta, levels, math.log2(levels))


# ----------------------------------------------------------- calibration ---

def calibrate_zeta0(pairs) -> float:
    """Least-squares ``zeta0`` from ``(empirical_radius, p, d, r_star_norm)`` tuples."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    num = den = 0.0
    for radius, p, d, r in pairs:
        if not math.isfinite(radius):
            raise ValueError("radii must be finite")
        g = robustness_estimate(p, d, r, 1.0)
        num += radius * g
        den += g * g
    if den == 0:
        raise ValueError("degenerate calibration: all estimates are zero")
    return num / den


def calibrate_constants(normalized_ratios, epsilon: float, slack: float = 0.05,
                        zeta0: float = 0.72) -> BoundConstants:
    """Choose ``C0`` and ``c0`` so the lp sandwich covers the given ratios.

    ``normalized_ratios`` are ``(r_{p,eps} / ||r*_p||_p) / lp_factor`` values from
    a calibration run.  The lower constant is set to ``(1 - slack)`` times their
    minimum, the upper one to ``(1 + slack)`` times their maximum.  By
    construction ``epsilon < eps0`` for the returned constants.
    """
    q = np.asarray([r for r in normalized_ratios if math.isfinite(r)], dtype=float)
    if q.size == 0 or np.any(q <= 0):
        raise ValueError("need positive finite ratios")
    eps = _check_eps(epsilon)
    z1 = (1 - slack) * q.min()
    z2 = (1 + slack) * q.max()
    C = z1 / math.sqrt(eps)
    C0 = 1.0 / (math.sqrt(2.0) * C)
    c_prime = 512.0 * C0 ** 4
    c = 1.0 / z2 ** 2 + math.sqrt(c_prime * eps)
    return BoundConstants(C0=C0, c0=math.sqrt(c), zeta0=zeta0)
