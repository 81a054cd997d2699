import math

import numpy as np
import pytest
from scipy.stats import binomtest, norm

import noiserobust.robustness as R
from noiserobust.models import LinearModel, MlpModel
from noiserobust.noise import CovarianceSpec, GaussianNoise, LpNoise
from noiserobust.robustness import (Bisection, Grid, RobustnessQuery, flip_probability,
                                    robustness_radius, wilson_interval)

D = 5
E1 = LinearModel(np.eye(D)[0], 0.0)
X1 = np.eye(D)[0]


def test_wilson_matches_scipy():
    for k, n in ((0, 50), (3, 100), (150, 10_000), (100, 100)):
        ci = binomtest(k, n).proportion_ci(0.95, method="wilson")
        lo, hi = wilson_interval(k, n)
        assert lo == pytest.approx(ci.low, abs=1e-12) and hi == pytest.approx(ci.high, abs=1e-12)


def test_zero_alpha():
    p, _ = flip_probability(E1, X1, LpNoise(2), 0.0, n=1000)
    assert p == 0.0


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        flip_probability(E1, X1, LpNoise(2), -1.0)


def test_box_noise_exact_probability():
    p, (lo, hi) = flip_probability(E1, X1, LpNoise(np.inf), 2.0, n=10_000, seed=1)
    assert lo <= 0.25 <= hi


def test_white_gaussian_exact_probability():
    eps = 0.1
    alpha = math.sqrt(D) * 1.0 / norm.ppf(1 - eps)
    p, (lo, hi) = flip_probability(E1, X1, GaussianNoise(CovarianceSpec.white(D)), alpha,
                                   n=10_000, seed=2)
    assert lo <= eps <= hi


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        flip_probability(E1, np.ones(D + 1), LpNoise(2), 1.0)


def test_radius_box_closed_form():
    eps = 0.05
    res = robustness_radius(E1, RobustnessQuery(X1, LpNoise(np.inf), eps, 100_000, seed=3))
    assert res.radius == pytest.approx(1 / (1 - 2 * eps), rel=0.02)


def test_radius_white_gaussian_closed_form():
    eps = 0.15
    q = RobustnessQuery(X1, GaussianNoise(CovarianceSpec.white(D)), eps, 100_000, seed=4)
    res = robustness_radius(E1, q)
    assert res.radius == pytest.approx(math.sqrt(D) / norm.ppf(1 - eps), rel=0.02)


def test_unreachable_epsilon_gives_infinity():
    # symmetric noise never flips a linear model with probability above 1/2
    res = robustness_radius(E1, RobustnessQuery(X1, LpNoise(2), 0.6, 1000, seed=5))
    assert res.radius == math.inf and not res.finite


def test_result_invariants():
    res = robustness_radius(E1, RobustnessQuery(X1, LpNoise(1.5), 0.05, 5000, seed=6))
    assert res.p_hat_at_radius >= 0.05
    alphas = [a for a, _, _ in res.trace]
    assert all(b > a for a, b in zip(alphas, alphas[1:]))
    # common random numbers make the estimate exactly monotone for linear models
    probs = [p for _, p, _ in res.trace]
    assert all(b >= a for a, b in zip(probs, probs[1:]))
    lo, hi = res.wilson_ci
    assert lo <= res.p_hat_at_radius <= hi


def test_scale_equivariance():
    q1 = RobustnessQuery(X1, LpNoise(3), 0.05, 5000, seed=7)
    q2 = RobustnessQuery(2 * X1, LpNoise(3), 0.05, 5000, seed=7)
    r1, r2 = robustness_radius(E1, q1).radius, robustness_radius(E1, q2).radius
    assert r2 == pytest.approx(2 * r1, rel=1e-3)


def test_seed_determinism_and_workers():
    q = RobustnessQuery(X1, LpNoise(2), 0.05, 9000, seed=8)
    a, b = robustness_radius(E1, q), robustness_radius(E1, q)
    assert a == b
    q4 = RobustnessQuery(X1, LpNoise(2), 0.05, 9000, seed=8, workers=4)
    assert robustness_radius(E1, q4) == a


def test_grid_agrees_with_bisection():
    qb = RobustnessQuery(X1, LpNoise(2), 0.05, 5000, seed=9, search=Bisection(0, 0.5))
    qg = RobustnessQuery(X1, LpNoise(2), 0.05, 5000, seed=9, search=Grid(0, 0.5, 50, 2))
    rb, rg = robustness_radius(E1, qb), robustness_radius(E1, qg)
    assert rg.p_hat_at_radius >= 0.05
    assert rg.radius == pytest.approx(rb.radius, rel=0.01)


def _tiny_mlp(rng):
    return MlpModel([rng.standard_normal((4, D)), rng.standard_normal((1, 4))],
                    [rng.standard_normal(4), np.array([0.1])])


def test_cached_and_regenerated_draws_agree(monkeypatch, rng):
    m = _tiny_mlp(rng)
    x = rng.standard_normal(D)
    a = R.FlipCounter(m, x, LpNoise(2), 5000, 10).count(3.0)
    monkeypatch.setattr(R, "_CACHE_LIMIT", 0)
    b = R.FlipCounter(m, x, LpNoise(2), 5000, 10).count(3.0)
    assert a == b


def test_linear_fast_path_matches_direct(rng):
    w, x = rng.standard_normal(D), rng.standard_normal(D)
    m = LinearModel(w, 0.2)

    class Plain:
        d = D

        def predict(self, X):
            return m.predict(X)

    for noise in (LpNoise(1), GaussianNoise(CovarianceSpec.white(D))):
        fast = R.FlipCounter(m, x, noise, 5000, 11).count(2.0)
        slow = R.FlipCounter(Plain(), x, noise, 5000, 11).count(2.0)
        assert fast == slow


def test_query_validation():
    for kw in ({"epsilon": 0.0}, {"epsilon": 1.0}, {"n_samples": 10},
               {"search": Bisection(1.0, 0.5)}, {"search": Grid(0, 1, 1)}):
        args = {"x": X1, "noise": LpNoise(2), "epsilon": 0.1, **kw}
        with pytest.raises(ValueError):
            RobustnessQuery(**args)
