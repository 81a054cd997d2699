"""Noise directions: uniform on the unit lp ball, and centered Gaussians.

Random streams are counter-based (Philox) and keyed by ``(seed, index)`` so
that independent blocks of draws can be produced in any order and still give
bit-identical results.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import as_vector

NCMAT_MAGIC = b"NCMAT1"


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent Philox generator for sub-stream ``index`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def parse_p(p) -> float:
    """Accept floats, ints or the strings ``"inf"``/``"infinity"``."""
    if isinstance(p, str):
        p = float("inf") if p.strip().lower() in ("inf", "infinity", "oo") else float(p)
    p = float(p)
    if np.isnan(p) or p < 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def conjugate(p: float) -> float:
    """Dual exponent ``p'`` with ``1/p + 1/p' = 1``."""
    p = parse_p(p)
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def lp_norm(v, p: float, axis=-1):
    p = float(p)
    a = np.abs(np.asarray(v, dtype=float))
    if np.isinf(p):
        return a.max(axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    if p == 2:
        return np.sqrt((a * a).sum(axis=axis))
    # scale first to avoid overflow of a**p
    m = a.max(axis=axis, keepdims=True)
    m = np.where(m > 0, m, 1.0)
    return np.squeeze(m, axis=axis) * ((a / m) ** p).sum(axis=axis) ** (1.0 / p)


def sample_lp_ball(p, d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from ``{v : ||v||_p <= 1}`` in ``R^d``.

    Finite ``p``: ``g / (sum |g_i|^p + Z)^(1/p)`` with ``g_i`` of density
    ``exp(-|t|^p)/(2 Gamma(1+1/p))`` and ``Z ~ Exp(1)``.  This representation is
    exact for every ``p >= 1`` (Barthe, Guedon, Mendelson, Naor).  ``p = inf``
    draws each coordinate uniformly on ``[-1, 1]``.
    """
    p = parse_p(p)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    shape = (d,) if size is None else (size, d)
    if np.isinf(p):
        return rng.uniform(-1.0, 1.0, shape)
    if p == 2:
        g = rng.standard_normal(shape) * np.sqrt(0.5)
    elif p == 1:
        g = rng.laplace(0.0, 1.0, shape)
    else:
        mag = rng.standard_gamma(1.0 / p, shape) ** (1.0 / p)
        g = np.where(rng.random(shape) < 0.5, -mag, mag)
    z = rng.standard_exponential(() if size is None else (size, 1))
    s = (np.abs(g) ** p).sum(axis=-1, keepdims=size is not None) + z
    return g / s ** (1.0 / p)


class CovarianceSpec:
    """Symmetric PSD covariance with a cached symmetric square root.

    Eigenvalues below ``-1e-12 * lambda_max`` are rejected; the remaining
    negative ones are clamped to zero.
    """

    def __init__(self, sigma, normalized: bool = False, sym_tol: float = 1e-12):
        S = np.array(sigma, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] == 0:
            raise ValueError("covariance must be a non-empty square matrix")
        if not np.all(np.isfinite(S)):
            raise ValueError("covariance has non-finite entries")
        scale = max(np.abs(S).max(), np.finfo(float).tiny)
        if np.abs(S - S.T).max() > sym_tol * scale:
            raise ValueError("covariance is not symmetric")
        S = 0.5 * (S + S.T)
        self._diagonal = bool(np.count_nonzero(S - np.diag(np.diag(S))) == 0)
        if self._diagonal:
            lam = np.diag(S).copy()
            U = np.eye(S.shape[0])
        else:
            lam, U = np.linalg.eigh(S)
        lam_max = lam.max()
        if lam_max <= 0:
            raise ValueError("covariance is zero or negative")
        if lam.min() < -1e-12 * lam_max:
            raise ValueError(f"covariance is not PSD (eigenvalue {lam.min():.3g})")
        lam = np.clip(lam, 0.0, None)
        if normalized and abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError(f"normalized covariance needs trace 1, got {lam.sum()}")
        self.matrix = S
        self.eigenvalues = lam
        self.eigenvectors = U
        if self._diagonal:
            self.sqrt = np.diag(np.sqrt(lam))
        else:
            self.sqrt = (U * np.sqrt(lam)) @ U.T
        self.normalized = normalized
        for a in (self.matrix, self.eigenvalues, self.eigenvectors, self.sqrt):
            a.setflags(write=False)

    @classmethod
    def white(cls, d: int) -> "CovarianceSpec":
        return cls(np.eye(d) / d, normalized=True)

    @classmethod
    def diagonal(cls, diag, normalized: bool = False) -> "CovarianceSpec":
        return cls(np.diag(np.asarray(diag, dtype=float)), normalized=normalized)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    @property
    def trace_of_square(self) -> float:
        return float((self.eigenvalues ** 2).sum())

    def apply_sqrt(self, V):
        """``sqrt(Sigma) @ v`` for each row ``v`` of ``V``."""
        if self._diagonal:
            return V * np.sqrt(self.eigenvalues)
        return V @ self.sqrt  # sqrt is symmetric

    def __repr__(self):
        return f"CovarianceSpec(d={self.d}, trace={self.trace:.6g})"


def sample_gaussian(sigma: CovarianceSpec, rng: np.random.Generator, size: int | None = None):
    z = rng.standard_normal((1 if size is None else size, sigma.d))
    v = sigma.apply_sqrt(z)
    return v[0] if size is None else v


@dataclass(frozen=True)
class LpNoise:
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", parse_p(self.p))

    def sample(self, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_lp_ball(self.p, d, rng, size=n)

    def describe(self) -> str:
        return "p=inf" if np.isinf(self.p) else f"p={self.p:g}"


@dataclass(frozen=True)
class GaussianNoise:
    sigma: CovarianceSpec
    label: str = "gaussian"

    def sample(self, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
        if d != self.sigma.d:
            raise ValueError(f"covariance is {self.sigma.d}-dimensional, point is {d}")
        return sample_gaussian(self.sigma, rng, size=n)

    def describe(self) -> str:
        return self.label


@dataclass(frozen=True)
class SignalDependentSigma:
    sigma: CovarianceSpec
    whiteness: float
    support: int


def signal_dependent_sigma(x, threshold: float) -> SignalDependentSigma:
    """Diagonal covariance supported on pixels ``x_i >= threshold``.

    ``Sigma_ii`` is proportional to ``x_i`` there and the trace is one.
    ``whiteness`` is the unnormalized trace ``sum_{x_i >= t} x_i``.
    """
    x = as_vector(x)
    keep = (x >= threshold) & (x > 0)
    if not keep.any():
        raise ValueError(f"no coordinate passes threshold {threshold}")
    diag = np.where(keep, x, 0.0)
    w = float(diag.sum())
    return SignalDependentSigma(CovarianceSpec.diagonal(diag / w, normalized=True),
                                w, int(keep.sum()))


# -------------------------------------------------------------------- I/O ---

def write_matrix_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(t) for t in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} fields")
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    return np.array(rows)


def write_matrix_bin(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(NCMAT_MAGIC)
        fh.write(struct.pack("<QQ", *M.shape))
        fh.write(np.ascontiguousarray(M).tobytes())


def read_matrix_bin(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:6] != NCMAT_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:6]!r}")
    if len(raw) < 22:
        raise ValueError(f"{path}: truncated header")
    rows, cols = struct.unpack("<QQ", raw[6:22])
    body = raw[22:]
    if len(body) != 8 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} doubles, got {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(6)
    return read_matrix_bin(path) if head == NCMAT_MAGIC else read_matrix_csv(path)


def load_covariance(path, normalized: bool = False) -> CovarianceSpec:
    return CovarianceSpec(read_matrix(path), normalized=normalized)
