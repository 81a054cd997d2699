# %% [markdown]
# # Gaussian noise, white and signal dependent
# For white noise the radius ratio lies between two closed-form multiples of sqrt(d).
# Noise confined to a few pixels (a "non-white" covariance) can be more or less harmful than white noise of the same power.

# %%
import math

import numpy as np

from noiserobust import bounds as B
from noiserobust.datasets import make_blob_images, make_blobs
from noiserobust.geometry import min_perturbation
from noiserobust.models import TrainConfig, train_logistic
from noiserobust.noise import CovarianceSpec, GaussianNoise, signal_dependent_sigma
from noiserobust.robustness import Bisection, RobustnessQuery, robustness_radius

eps = 0.15
print("band / sqrt(d):", round(B.gaussian_zeta1(eps), 4), round(B.gaussian_zeta2(eps), 4))

# %% White noise on a linear model.
d = 400
data = make_blobs(d, 1000, 6.0, seed=0)
model = train_logistic(data, TrainConfig(epochs=300)).model
white = CovarianceSpec.white(d)
for i in range(5):
    x = data.X[i]
    r = min_perturbation(model, x, 2).norm
    q = RobustnessQuery(x, GaussianNoise(white), eps, 10_000, seed=i,
                        search=Bisection(0.0, math.sqrt(d) * r))
    print(f"point {i}: ratio / sqrt(d) = {robustness_radius(model, q).radius / r / math.sqrt(d):.3f}")

# %% Noise on the bright pixels of an image only.
imgs = make_blob_images(400, seed=2, classes=2)
model = train_logistic(imgs, TrainConfig(epochs=300)).model
x = imgs.X[0]
sd = signal_dependent_sigma(x, 30.0)
rep = B.gaussian_bounds(model.w, sd.sigma, eps)
print(f"whiteness {sd.whiteness:.3f}, factor {rep.factor:.1f} vs sqrt(d) {math.sqrt(model.d):.1f}")
