"""Synthetic datasets and dataset file formats (CSV, IDX)."""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .models import Dataset
from .noise import rng_stream

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    pass


def make_blobs(d: int, n: int, separation: float = 6.0, seed: int = 0,
               classes: int = 2) -> Dataset:
    """Gaussian clusters with unit isotropic within-class variance.

    Two classes sit at ``+-(separation/2) u`` for a seeded random unit ``u``.  With
    more classes the means are ``separation/sqrt(2)`` times orthonormal
    directions, so every pair of means is ``separation`` apart.
    """
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    if classes < 2 or (classes > 2 and classes > d):
        raise ValueError("need 2 <= classes <= d")
    rng = rng_stream(seed, 0)
    if classes == 2:
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        means = np.stack([-0.5 * separation * u, 0.5 * separation * u])
    else:
        Q, _ = np.linalg.qr(rng.standard_normal((d, classes)))
        means = separation / np.sqrt(2.0) * Q.T
    y = rng.permutation(np.arange(n) % classes)
    X = means[y] + rng.standard_normal((n, d))
    return Dataset(X, y, classes)


def make_blob_images(n: int, seed: int = 0, classes: int = 3, side: int = 16,
                     background: float = 20.0, pixel_noise: float = 8.0,
                     amplitude=(10.0, 40.0), width: float = 2.5,
                     jitter: float = 1.5) -> Dataset:
    """Grayscale ``side x side`` images with one faint Gaussian spot.

    Class ``k`` puts the spot near the ``k``-th point of a circle around the
    image centre; amplitude and position are randomized per image.  Pixels are
    clipped to ``[0, 255]`` and flattened row-major.
    """
    if n < 1 or classes < 2:
        raise ValueError("need n >= 1 and classes >= 2")
    rng = rng_stream(seed, 1)
    y = rng.permutation(np.arange(n) % classes)
    c = (side - 1) / 2.0
    ang = 2 * np.pi * np.arange(classes) / classes
    centres = np.stack([c + 0.3 * side * np.cos(ang), c + 0.3 * side * np.sin(ang)], axis=1)
    pos = centres[y] + rng.uniform(-jitter, jitter, (n, 2))
    amp = rng.uniform(*amplitude, n)
    ii, jj = np.mgrid[0:side, 0:side]
    r2 = (ii[None] - pos[:, 0, None, None]) ** 2 + (jj[None] - pos[:, 1, None, None]) ** 2
    img = background + amp[:, None, None] * np.exp(-r2 / (2 * width ** 2))
    img = img + pixel_noise * rng.standard_normal(img.shape)
    X = np.clip(img, 0.0, 255.0).reshape(n, side * side)
    return Dataset(X, y, classes)


# -------------------------------------------------------------------- CSV ---

def write_dataset_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *(f"f{i}" for i in range(data.d))])
        for x, y in zip(data.X, data.y):
            w.writerow([int(y), *(repr(float(v)) for v in x)])


def read_dataset_csv(path, n_classes: int | None = None) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        d = len(header) - 1
        if d < 1 or header[0].strip() != "label" or \
                [h.strip() for h in header[1:]] != [f"f{i}" for i in range(d)]:
            raise DataFormatError(f"{path}:1: header must be label,f0,...,f{{d-1}}")
        X, y = [], []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not t.strip() for t in row):
                continue
            if len(row) != d + 1:
                raise DataFormatError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                lab = float(row[0])
                vals = [float(t) for t in row[1:]]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if lab != int(lab) or lab < 0:
                raise DataFormatError(f"{path}:{lineno}: label must be a non-negative integer")
            y.append(int(lab))
            X.append(vals)
    if not X:
        raise DataFormatError(f"{path}: no data rows")
    y = np.array(y)
    L = n_classes if n_classes is not None else max(2, int(y.max()) + 1)
    try:
        return Dataset(np.array(X), y, L)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


# -------------------------------------------------------------------- IDX ---

def write_idx_images(path, images) -> None:
    images = np.asarray(images)
    if images.ndim != 3:
        raise ValueError("images must have shape (count, rows, cols)")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(np.clip(np.rint(images), 0, 255).astype(np.uint8).tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.astype(np.uint8).tobytes())


def read_idx_images(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{path}: bad IDX image magic {magic:#010x}")
    body = raw[16:]
    if len(body) != n * rows * cols:
        raise DataFormatError(f"{path}: expected {n * rows * cols} pixel bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{path}: bad IDX label magic {magic:#010x}")
    body = raw[8:]
    if len(body) != n:
        raise DataFormatError(f"{path}: expected {n} label bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).copy()


def ingest_dataset(path, format: str = "auto", labels_path=None,
                   n_classes: int | None = None) -> Dataset:
    """Load a dataset from CSV or from an IDX image file plus an IDX label file.

    IDX images are flattened row-major; without ``labels_path`` every label is 0.
    """
    path = Path(path)
    fmt = format.lower()
    if fmt == "auto":
        with open(path, "rb") as fh:
            head = fh.read(4)
        fmt = "idx" if len(head) == 4 and struct.unpack(">I", head)[0] == IDX_IMAGES_MAGIC else "csv"
    if fmt == "csv":
        return read_dataset_csv(path, n_classes)
    if fmt != "idx":
        raise ValueError(f"unknown dataset format {format!r}")
    imgs = read_idx_images(path)
    X = imgs.reshape(imgs.shape[0], -1).astype(float)
    if labels_path is None:
        y = np.zeros(X.shape[0], dtype=int)
    else:
        y = read_idx_labels(labels_path).astype(int)
        if y.size != X.shape[0]:
            raise DataFormatError(f"{len(y)} labels for {X.shape[0]} images")
    L = n_classes if n_classes is not None else max(2, int(y.max()) + 1 if y.size else 2)
    if X.shape[0] == 0:
        raise DataFormatError(f"{path}: no images")
    return Dataset(X, y, L)
