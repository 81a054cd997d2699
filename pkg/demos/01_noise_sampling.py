# %% [markdown]
# # Sampling noise directions
# Uniform draws from lp unit balls, and Gaussian noise with a trace-one covariance.

# %%
import numpy as np

from noiserobust.noise import CovarianceSpec, lp_norm, rng_stream, sample_gaussian, sample_lp_ball

rng = rng_stream(0)
d, n = 10, 50_000

# %% The radius of a uniform point in a d-dimensional ball has mean d/(d+1) for every p.
for p in (1, 2, 5, np.inf):
    r = lp_norm(sample_lp_ball(p, d, rng, n), p)
    print(f"p={p:>4}: max ||v||_p = {r.max():.4f}, mean = {r.mean():.4f}  (d/(d+1) = {d / (d + 1):.4f})")

# %% p=1 noise is spiky, p=inf noise is dense: compare the largest coordinate share.
for p in (1, np.inf):
    V = sample_lp_ball(p, 400, rng, 2000)
    share = np.abs(V).max(axis=1) / np.abs(V).sum(axis=1)
    print(f"p={p}: median share of the largest coordinate {np.median(share):.4f}")

# %% Gaussian noise with a correlated covariance.
S = np.array([[0.5, 0.2, 0.0], [0.2, 0.3, 0.05], [0.0, 0.05, 0.2]])
V = sample_gaussian(CovarianceSpec(S, normalized=True), rng, 100_000)
print("empirical covariance:\n", np.round(V.T @ V / len(V), 3))
