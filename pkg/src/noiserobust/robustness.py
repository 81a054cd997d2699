"""Monte-Carlo estimation of the random-noise robustness radius.

The radius at ``x`` is the smallest scaling ``alpha >= 0`` such that
``P{label(x + alpha v) != label(x)} >= epsilon`` for ``v`` drawn from the noise
model (``+inf`` if no such scaling exists).  Both noise families are symmetric
(``v`` and ``-v`` have the same law), so negative scalings are never needed.

Draws are organised in fixed-size blocks; block ``b`` always comes from the
sub-stream ``(seed, b)``.  A search over ``alpha`` reuses the same draws at
every candidate (common random numbers), which makes the estimated flip
probability exactly monotone in ``alpha`` for linear models.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .models import as_vector
from .noise import rng_stream

BLOCK = 4096
# keep raw directions in memory only below this many floats; otherwise redraw
_CACHE_LIMIT = 40_000_000
MAX_DOUBLINGS = 20


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    z = norm.ppf(0.5 + confidence / 2.0)
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _block_sizes(n: int):
    full, rest = divmod(n, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


class FlipCounter:
    """Counts label flips of ``x + alpha v`` over a fixed set of ``n`` draws."""

    def __init__(self, model, x, noise, n: int, seed: int, workers: int = 1):
        self.model = model
        self.x = as_vector(x, model.d)
        self.noise = noise
        self.n = int(n)
        if self.n < 1:
            raise ValueError("n must be positive")
        self.seed = seed
        self.workers = max(1, int(workers))
        self.sizes = _block_sizes(self.n)
        self.base = int(model.predict(self.x[None, :])[0])
        lin = getattr(model, "linear_parts", None)
        self._linear = lin() if lin is not None else None
        self._blocks = None
        if self._linear is not None:
            W, b = self._linear
            self._s0 = W @ self.x + b
            self._blocks = self._map(lambda i: self._draw(i) @ W.T)
        elif self.n * model.d <= _CACHE_LIMIT:
            self._blocks = self._map(self._draw)

    def _map(self, fn):
        idx = range(len(self.sizes))
        if self.workers == 1 or len(self.sizes) == 1:
            return [fn(i) for i in idx]
        with ThreadPoolExecutor(self.workers) as ex:
            return list(ex.map(fn, idx))

    def _draw(self, i: int) -> np.ndarray:
        return self.noise.sample(self.model.d, self.sizes[i], rng_stream(self.seed, i))

    def _count_block(self, i: int, alpha: float) -> int:
        if self._linear is not None:
            s = self._s0 + alpha * self._blocks[i]
            if s.shape[1] == 1:
                lab = (s[:, 0] > 0).astype(int)
            else:
                lab = np.argmax(s, axis=1)
        else:
            V = self._blocks[i] if self._blocks is not None else self._draw(i)
            lab = self.model.predict(self.x + alpha * V)
        return int(np.count_nonzero(lab != self.base))

    def count(self, alpha: float) -> int:
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        if alpha == 0:
            return 0
        return sum(self._map(lambda i: self._count_block(i, alpha)))

    def probability(self, alpha: float) -> tuple[float, tuple[float, float]]:
        k = self.count(alpha)
        return k / self.n, wilson_interval(k, self.n)


def flip_probability(model, x, noise, alpha: float, n: int = 10_000, seed: int = 0,
                     workers: int = 1):
    """Fraction of ``n`` noise draws flipping the label at scale ``alpha``,
    with its 95% Wilson interval."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return FlipCounter(model, x, noise, n, seed, workers).probability(alpha)


@dataclass(frozen=True)
class Bisection:
    alpha_lo: float = 0.0
    alpha_hi: float = 1.0
    tol: float = 1e-4


@dataclass(frozen=True)
class Grid:
    alpha_min: float = 0.0
    alpha_max: float = 1.0
    steps: int = 50
    refine_rounds: int = 2


@dataclass
class RobustnessQuery:
    x: np.ndarray
    noise: object
    epsilon: float
    n_samples: int = 10_000
    seed: int = 0
    search: Bisection | Grid = field(default_factory=Bisection)
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.n_samples < 100:
            raise ValueError("n_samples must be at least 100")
        s = self.search
        if isinstance(s, Bisection):
            if not (0 <= s.alpha_lo < s.alpha_hi) or s.tol <= 0:
                raise ValueError("bisection needs 0 <= alpha_lo < alpha_hi and tol > 0")
        elif isinstance(s, Grid):
            if not (0 <= s.alpha_min < s.alpha_max) or s.steps < 2:
                raise ValueError("grid needs 0 <= alpha_min < alpha_max and steps >= 2")
        else:
            raise TypeError("search must be Bisection or Grid")


@dataclass
class RobustnessResult:
    radius: float
    p_hat_at_radius: float
    wilson_ci: tuple[float, float]
    trace: list[tuple[float, float, int]]

    @property
    def finite(self) -> bool:
        return math.isfinite(self.radius)


class _Search:
    def __init__(self, counter: FlipCounter, eps: float):
        self.counter = counter
        self.eps = eps
        self.seen: dict[float, int] = {}

    def hits(self, alpha: float) -> bool:
        if alpha not in self.seen:
            self.seen[alpha] = self.counter.count(alpha)
        return self.seen[alpha] / self.counter.n >= self.eps

    def result(self, radius: float) -> RobustnessResult:
        n = self.counter.n
        trace = [(a, k / n, n) for a, k in sorted(self.seen.items())]
        if math.isinf(radius):
            return RobustnessResult(math.inf, float("nan"), (float("nan"), float("nan")), trace)
        k = self.seen[radius]
        return RobustnessResult(radius, k / n, wilson_interval(k, n), trace)


def _grow(search: _Search, hi: float) -> float | None:
    for _ in range(MAX_DOUBLINGS + 1):
        if search.hits(hi):
            return hi
        hi *= 2.0
    return None


def robustness_radius(model, query: RobustnessQuery) -> RobustnessResult:
    """Smallest ``alpha`` whose estimated flip probability reaches ``epsilon``.

    Bisection assumes the flip probability is monotone in ``alpha`` (true for
    linear models); the grid search makes no such assumption.  Decisions use
    the point estimate; the Wilson interval is only reported.
    """
    counter = FlipCounter(model, query.x, query.noise, query.n_samples, query.seed,
                          query.workers)
    search = _Search(counter, query.epsilon)
    s = query.search
    if isinstance(s, Bisection):
        hi = _grow(search, s.alpha_hi)
        if hi is None:
            return search.result(math.inf)
        lo = s.alpha_lo
        if lo > 0 and search.hits(lo):
            return search.result(lo)
        if hi > s.alpha_hi:
            lo = max(lo, hi / 2.0)
        while (hi - lo) > s.tol * hi:
            mid = 0.5 * (lo + hi)
            if search.hits(mid):
                hi = mid
            else:
                lo = mid
        return search.result(hi)

    amax = s.alpha_max
    for _ in range(MAX_DOUBLINGS + 1):
        grid = np.linspace(s.alpha_min, amax, s.steps)
        found = next((i for i, a in enumerate(grid) if a > 0 and search.hits(float(a))), None)
        if found is not None:
            break
        amax *= 2.0
    else:
        return search.result(math.inf)
    hi = float(grid[found])
    lo = float(grid[found - 1]) if found > 0 else 0.0
    for _ in range(s.refine_rounds):
        sub = np.linspace(lo, hi, 11)[1:-1]
        nxt = next((float(a) for a in sub if a > 0 and search.hits(float(a))), None)
        if nxt is None:
            lo = float(sub[-1])
        else:
            i = int(np.flatnonzero(sub == nxt)[0])
            lo = float(sub[i - 1]) if i > 0 else lo
            hi = nxt
    return search.result(hi)
