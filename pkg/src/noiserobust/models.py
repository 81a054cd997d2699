"""Classifiers: linear, multi-class linear and a small tanh MLP, plus trainers.

Every model exposes the same small surface:

* ``scores(X)``: raw outputs, shape ``(n,)`` for binary models and ``(n, L)``
  for multi-class ones;
* ``predict(X)``: integer labels;
* ``gradient(x, pair)``: gradient of ``f`` (binary) or ``f_k - f_l``.

Binary models label a point ``1`` iff ``f(x) > 0``.  Multi-class models use
``argmax`` with ties broken towards the smallest class index (``np.argmax``
already does this).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class DimensionError(ValueError):
    pass


def as_vector(x, d: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if d is not None and v.size != d:
        raise DimensionError(f"expected dimension {d}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    return v


def _as_batch(X, d: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != d:
        raise DimensionError(f"expected dimension {d}, got {X.shape[-1]}")
    return X, single


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("dataset must hold at least one point")
        if y.shape != (X.shape[0],):
            raise ValueError("one label per point required")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(y == np.round(y)):
                raise ValueError("labels must be integers")
        y = y.astype(int)
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.n_classes)


class LinearModel:
    """Binary hyperplane classifier ``f(x) = w.x + b``."""

    n_classes = 2
    binary = True

    def __init__(self, w, b: float = 0.0):
        self.w = as_vector(w)
        self.b = float(b)
        if not np.linalg.norm(self.w) > 0:
            raise ValueError("weight vector must be nonzero")
        self.w.setflags(write=False)

    @property
    def d(self) -> int:
        return self.w.size

    def scores(self, X):
        X, single = _as_batch(X, self.d)
        s = X @ self.w + self.b
        return s[0] if single else s

    def predict(self, X):
        return (np.asarray(self.scores(X)) > 0).astype(int)

    def gradient(self, x, pair=None):
        as_vector(x, self.d)
        return _binary_sign(pair) * self.w

    def linear_parts(self):
        """``(W, b)`` with scores ``x @ W.T + b``; used for fast line evaluation."""
        return self.w[None, :], np.array([self.b])

    def __repr__(self):
        return f"LinearModel(d={self.d}, b={self.b:g})"


class MulticlassLinearModel:
    """``f_k(x) = w_k.x + b_k`` for ``k < L``; rows of ``W`` are the ``w_k``."""

    binary = False

    def __init__(self, W, b=None):
        W = np.array(W, dtype=float)
        if W.ndim != 2 or W.shape[0] < 2:
            raise ValueError("need a (L, d) weight matrix with L >= 2")
        if not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite")
        b = np.zeros(W.shape[0]) if b is None else np.array(b, dtype=float).reshape(-1)
        if b.shape != (W.shape[0],):
            raise ValueError("one bias per class required")
        L = W.shape[0]
        for k in range(L):
            for l in range(k + 1, L):
                if not np.linalg.norm(W[k] - W[l]) > 0:
                    raise ValueError(f"classes {k} and {l} have identical weights")
        W.setflags(write=False)
        b.setflags(write=False)
        self.W, self.b = W, b

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def scores(self, X):
        X, single = _as_batch(X, self.d)
        s = X @ self.W.T + self.b
        return s[0] if single else s

    def predict(self, X):
        return np.argmax(self.scores(X), axis=-1)

    def gradient(self, x, pair=None):
        as_vector(x, self.d)
        if pair is None:
            raise ValueError("multi-class gradient needs a class pair (k, l)")
        k, l = pair
        return self.W[k] - self.W[l]

    def linear_parts(self):
        return self.W, self.b

    def __repr__(self):
        return f"MulticlassLinearModel(L={self.n_classes}, d={self.d})"


class MlpModel:
    """Fully connected net with tanh hidden layers and a linear output layer.

    ``weights[i]`` has shape ``(out, in)``.  A single output unit means binary
    mode (label 1 iff the output is positive).
    """

    activation = "tanh"

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias vector per weight matrix")
        ws, bs = [], []
        for i, (W, b) in enumerate(zip(weights, biases)):
            W = np.array(W, dtype=float)
            b = np.array(b, dtype=float).reshape(-1)
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {i}: bad shapes {W.shape}, {b.shape}")
            if i and W.shape[1] != ws[-1].shape[0]:
                raise ValueError(f"layer {i}: input size does not match previous layer")
            W.setflags(write=False)
            b.setflags(write=False)
            ws.append(W)
            bs.append(b)
        self.weights, self.biases = tuple(ws), tuple(bs)

    @property
    def d(self) -> int:
        return self.weights[0].shape[1]

    @property
    def binary(self) -> bool:
        return self.weights[-1].shape[0] == 1

    @property
    def n_classes(self) -> int:
        return 2 if self.binary else self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.d] + [W.shape[0] for W in self.weights]

    def _forward(self, X):
        acts = [X]
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W.T + b)
            acts.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, acts

    def scores(self, X):
        X, single = _as_batch(X, self.d)
        out, _ = self._forward(X)
        if self.binary:
            out = out[:, 0]
        return out[0] if single else out

    def predict(self, X):
        s = np.asarray(self.scores(X))
        if self.binary:
            return (s > 0).astype(int)
        return np.argmax(s, axis=-1)

    def gradient(self, x, pair=None):
        x = as_vector(x, self.d)
        if self.binary:
            g_out = np.array([_binary_sign(pair)])
        else:
            if pair is None:
                raise ValueError("multi-class gradient needs a class pair (k, l)")
            k, l = pair
            g_out = np.zeros(self.n_classes)
            g_out[k] += 1.0
            g_out[l] -= 1.0
        _, acts = self._forward(x[None, :])
        g = g_out @ self.weights[-1]
        for i in range(len(self.weights) - 2, -1, -1):
            h = acts[i + 1][0]
            g = (g * (1.0 - h * h)) @ self.weights[i]
        return g

    def __repr__(self):
        return f"MlpModel(layers={self.layer_sizes})"


def label(model, x) -> int:
    x = as_vector(x, model.d)
    return int(model.predict(x[None, :])[0])


def gradient(model, x, class_pair=None) -> np.ndarray:
    if not hasattr(model, "gradient"):
        raise TypeError(f"{type(model).__name__} is not differentiable")
    return model.gradient(as_vector(x, model.d), class_pair)


def class_scores(model, X) -> np.ndarray:
    """Scores as an ``(n, L)`` array; a binary model ``f`` maps to ``(0, f)``."""
    s = np.asarray(model.scores(np.atleast_2d(X)), dtype=float)
    if model.binary:
        return np.stack([np.zeros_like(s), s], axis=1)
    return s


def _binary_sign(pair) -> float:
    if pair is None:
        return 1.0
    k, l = pair
    if {k, l} != {0, 1}:
        raise ValueError(f"binary model has no class pair {pair}")
    return 1.0 if k == 1 else -1.0


# ---------------------------------------------------------------- training ---

@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    seed: int = 0
    hidden: tuple[int, ...] = (16,)
    weight_decay: float = 0.0


@dataclass
class TrainResult:
    model: object
    accuracy: float
    losses: list[float] = field(default_factory=list)


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return mu, sd


def train_logistic(data: Dataset, config: TrainConfig | None = None) -> TrainResult:
    """Full-batch gradient descent on the logistic loss.

    Features are standardized internally; the affine map is folded back into
    ``(w, b)`` so the returned model acts on raw inputs.
    """
    config = config or TrainConfig()
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.n_classes != 2 or not set(np.unique(data.y)) <= {0, 1}:
        raise ValueError("logistic regression needs binary labels")
    mu, sd = _standardize(data.X)
    Z = (data.X - mu) / sd
    t = data.y.astype(float)
    rng = np.random.default_rng(config.seed)
    w = 0.01 * rng.standard_normal(data.d)
    b = 0.0
    n = len(data)
    losses = []
    for _ in range(config.epochs):
        s = Z @ w + b
        p = 0.5 * (1.0 + np.tanh(0.5 * s))
        losses.append(float(np.mean(np.logaddexp(0.0, s) - t * s)))
        g = p - t
        w -= config.learning_rate * (Z.T @ g / n + config.weight_decay * w)
        b -= config.learning_rate * g.mean()
    w_raw = w / sd
    b_raw = b - w_raw @ mu
    if not np.linalg.norm(w_raw) > 0:
        raise ValueError("training produced a zero weight vector")
    model = LinearModel(w_raw, b_raw)
    acc = float(np.mean(model.predict(data.X) == data.y))
    return TrainResult(model, acc, losses)


def train_mlp(data: Dataset, config: TrainConfig | None = None) -> TrainResult:
    """Full-batch gradient descent for a tanh MLP (softmax or logistic output)."""
    config = config or TrainConfig()
    if len(data) == 0:
        raise ValueError("empty dataset")
    L = data.n_classes
    n_out = 1 if L == 2 else L
    sizes = [data.d, *config.hidden, n_out]
    rng = np.random.default_rng(config.seed)
    Ws = [rng.standard_normal((o, i)) / np.sqrt(i) for i, o in zip(sizes[:-1], sizes[1:])]
    bs = [np.zeros(o) for o in sizes[1:]]
    mu, sd = _standardize(data.X)
    Z = (data.X - mu) / sd
    n = len(data)
    if n_out == 1:
        T = data.y.astype(float)[:, None]
    else:
        T = np.eye(L)[data.y]
    lr = config.learning_rate
    losses = []
    for _ in range(config.epochs):
        acts = [Z]
        h = Z
        for W, b in zip(Ws[:-1], bs[:-1]):
            h = np.tanh(h @ W.T + b)
            acts.append(h)
        out = h @ Ws[-1].T + bs[-1]
        if n_out == 1:
            p = 0.5 * (1.0 + np.tanh(0.5 * out))
            losses.append(float(np.mean(np.logaddexp(0.0, out) - T * out)))
        else:
            out = out - out.max(axis=1, keepdims=True)
            e = np.exp(out)
            p = e / e.sum(axis=1, keepdims=True)
            losses.append(float(-np.mean(np.log(p[np.arange(n), data.y] + 1e-300))))
        delta = (p - T) / n
        for i in range(len(Ws) - 1, -1, -1):
            gW = delta.T @ acts[i] + config.weight_decay * Ws[i]
            gb = delta.sum(axis=0)
            if i:
                delta = (delta @ Ws[i]) * (1.0 - acts[i] ** 2)
            Ws[i] -= lr * gW
            bs[i] -= lr * gb
    # fold standardization into the first layer
    W0 = Ws[0] / sd
    b0 = bs[0] - W0 @ mu
    model = MlpModel([W0, *Ws[1:]], [b0, *bs[1:]])
    acc = float(np.mean(model.predict(data.X) == data.y))
    return TrainResult(model, acc, losses)


# ---------------------------------------------------------- serialization ---

def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {"format_version": FORMAT_VERSION, "kind": "linear", "d": model.d, "L": 2,
                "weights": model.w.tolist(), "biases": [model.b], "activation": None}
    if isinstance(model, MulticlassLinearModel):
        return {"format_version": FORMAT_VERSION, "kind": "multiclass_linear", "d": model.d,
                "L": model.n_classes, "weights": model.W.ravel().tolist(),
                "biases": model.b.tolist(), "activation": None}
    if isinstance(model, MlpModel):
        return {"format_version": FORMAT_VERSION, "kind": "mlp", "d": model.d,
                "L": model.n_classes, "layer_sizes": model.layer_sizes,
                "weights": [W.ravel().tolist() for W in model.weights],
                "biases": [b.tolist() for b in model.biases],
                "activation": model.activation}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    kind = doc.get("kind")
    d = int(doc["d"])
    if kind == "linear":
        return LinearModel(np.asarray(doc["weights"], dtype=float), doc["biases"][0])
    if kind == "multiclass_linear":
        L = int(doc["L"])
        return MulticlassLinearModel(np.asarray(doc["weights"], dtype=float).reshape(L, d),
                                     doc["biases"])
    if kind == "mlp":
        if doc.get("activation") != "tanh":
            raise ValueError(f"unsupported activation {doc.get('activation')!r}")
        sizes = doc["layer_sizes"]
        Ws = [np.asarray(w, dtype=float).reshape(o, i)
              for w, i, o in zip(doc["weights"], sizes[:-1], sizes[1:])]
        return MlpModel(Ws, doc["biases"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
