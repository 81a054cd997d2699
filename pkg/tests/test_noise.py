import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from noiserobust.noise import (NCMAT_MAGIC, CovarianceSpec, GaussianNoise, LpNoise, conjugate,
                               lp_norm, parse_p, read_matrix, read_matrix_bin, rng_stream,
                               sample_gaussian, sample_lp_ball, signal_dependent_sigma,
                               write_matrix_bin, write_matrix_csv)


def test_parse_and_conjugate():
    assert parse_p("inf") == np.inf and parse_p(2) == 2.0
    assert conjugate(1) == np.inf and conjugate(np.inf) == 1.0 and conjugate(3) == 1.5
    with pytest.raises(ValueError):
        parse_p(0.5)


def test_lp_norm_matches_numpy(rng):
    v = rng.standard_normal(7)
    for p in (1, 1.5, 2, 3, np.inf):
        assert lp_norm(v, p) == pytest.approx(np.linalg.norm(v, p), rel=1e-12)


def test_box_samples_bounded():
    V = sample_lp_ball(np.inf, 3, rng_stream(0), 1000)
    assert np.abs(V).max() <= 1.0


def test_l2_mean_norm_two_dims():
    V = sample_lp_ball(2, 2, rng_stream(1), 100_000)
    assert np.linalg.norm(V, axis=1).mean() == pytest.approx(2 / 3, abs=0.01)


def test_l1_volume_fraction():
    V = sample_lp_ball(1, 2, rng_stream(2), 100_000)
    assert np.mean(np.abs(V).sum(axis=1) <= 0.5) == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("p", [1, 1.3, 2, 3.5, 7])
def test_radial_law_is_uniform(p):
    # uniform on the ball <=> ||v||_p^d ~ U(0, 1)
    d = 4
    V = sample_lp_ball(p, d, rng_stream(3), 20_000)
    u = lp_norm(V, p) ** d
    assert stats.kstest(u, "uniform").pvalue > 1e-3


@pytest.mark.parametrize("p", [1.5, 3])
def test_direction_law_matches_rejection(p):
    # compare |v_1| against rejection sampling from the enclosing cube
    d = 3
    V = sample_lp_ball(p, d, rng_stream(4), 20_000)
    rng = np.random.default_rng(0)
    C = rng.uniform(-1, 1, (100_000, d))
    R = C[lp_norm(C, p) <= 1][:20_000]
    assert stats.ks_2samp(np.abs(V[:, 0]), np.abs(R[:, 0])).pvalue > 1e-3


@given(st.sampled_from([1.0, 1.2, 1.5, 2.0, 3.0, 5.0, 10.0]), st.integers(1, 60),
       st.integers(0, 2**31))
def test_lp_containment(p, d, seed):
    V = sample_lp_ball(p, d, rng_stream(seed), 50)
    assert np.all(lp_norm(V, p) <= 1 + 1e-12)


def test_single_draw_shape():
    assert sample_lp_ball(2, 5, rng_stream(0)).shape == (5,)
    with pytest.raises(ValueError):
        sample_lp_ball(2, 0, rng_stream(0))


def test_reproducible_streams():
    a = sample_lp_ball(1.5, 10, rng_stream(9, 3), 100)
    b = sample_lp_ball(1.5, 10, rng_stream(9, 3), 100)
    c = sample_lp_ball(1.5, 10, rng_stream(9, 4), 100)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("noise", [LpNoise(1), LpNoise(2.5), LpNoise(np.inf),
                                   GaussianNoise(CovarianceSpec(np.diag([0.5, 0.3, 0.2])))])
def test_symmetric_mean(noise):
    V = noise.sample(3, 100_000, rng_stream(5))
    se = V.std(axis=0) / np.sqrt(V.shape[0])
    assert np.all(np.abs(V.mean(axis=0)) <= 4 * se)


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_second_moment_bracket(p, rng):
    for d in (10, 100):
        V = sample_lp_ball(p, d, rng_stream(6, d), 20_000)
        for _ in range(20):
            w = rng.standard_normal(d)
            w /= np.linalg.norm(w)
            m2 = np.mean((V @ w) ** 2) * d ** (2 / p)
            assert 0.05 <= m2 <= 5


def test_gaussian_white_energy():
    d = 10
    V = sample_gaussian(CovarianceSpec.white(d), rng_stream(7), 100_000)
    assert np.mean(np.sum(V ** 2, axis=1)) == pytest.approx(1.0, abs=0.01)


def test_gaussian_degenerate_direction():
    V = sample_gaussian(CovarianceSpec(np.diag([1.0, 0.0])), rng_stream(8), 1000)
    assert np.all(V[:, 1] == 0.0)


def test_gaussian_covariance_recovered():
    S = np.array([[2.0, 1.0], [1.0, 2.0]]) / 4
    V = sample_gaussian(CovarianceSpec(S), rng_stream(9), 100_000)
    np.testing.assert_allclose(np.cov(V.T), S, atol=0.02)


def test_covariance_validation():
    with pytest.raises(ValueError):
        CovarianceSpec([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        CovarianceSpec([[1.0, 0.0], [0.0, -0.5]])
    with pytest.raises(ValueError):
        CovarianceSpec(np.eye(2), normalized=True)
    # tiny negative eigenvalue from round-off is clamped
    u = np.array([1.0, 1.0]) / np.sqrt(2)
    S = np.outer(u, u) - 1e-14 * np.eye(2)
    spec = CovarianceSpec(S)
    assert spec.eigenvalues.min() == 0.0
    np.testing.assert_allclose(spec.sqrt @ spec.sqrt, np.outer(u, u), atol=1e-7)


def test_sqrt_squares_back(rng):
    A = rng.standard_normal((5, 5))
    S = A @ A.T
    spec = CovarianceSpec(S)
    np.testing.assert_allclose(spec.sqrt @ spec.sqrt, S, atol=1e-10)
    assert np.allclose(spec.sqrt, spec.sqrt.T)


def test_signal_dependent_examples():
    sd = signal_dependent_sigma([10.0, 0.0, 5.0], 4)
    np.testing.assert_allclose(np.diag(sd.sigma.matrix), [10 / 15, 0, 5 / 15])
    assert sd.whiteness == 15
    sd = signal_dependent_sigma([1.0, 1.0], 0)
    np.testing.assert_allclose(sd.sigma.matrix, np.eye(2) / 2)
    assert sd.whiteness == 2
    sd = signal_dependent_sigma([3.0, 2.0], 2.5)
    np.testing.assert_allclose(sd.sigma.matrix, np.diag([1.0, 0.0]))
    assert sd.whiteness == 3
    assert sd.sigma.trace == pytest.approx(1.0)


def test_signal_dependent_empty_support():
    with pytest.raises(ValueError):
        signal_dependent_sigma([1.0, 2.0], 5.0)


def test_matrix_io_roundtrip(tmp_path, rng):
    M = rng.standard_normal((3, 3))
    write_matrix_csv(tmp_path / "m.csv", M)
    write_matrix_bin(tmp_path / "m.bin", M)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), M)
    assert np.array_equal(read_matrix(tmp_path / "m.bin"), M)


def test_binary_layout(tmp_path):
    write_matrix_bin(tmp_path / "m.bin", [[1.0, 2.0]])
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:6] == NCMAT_MAGIC
    assert raw[6:22] == (1).to_bytes(8, "little") + (2).to_bytes(8, "little")
    assert raw[22:] == np.array([1.0, 2.0], "<f8").tobytes()


def test_binary_errors(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NCMAT2" + bytes(16))
    with pytest.raises(ValueError):
        read_matrix_bin(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(NCMAT_MAGIC + (2).to_bytes(8, "little") * 2 + bytes(8))
    with pytest.raises(ValueError):
        read_matrix_bin(tmp_path / "short.bin")
