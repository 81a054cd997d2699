# %% [markdown]
# # Robustness to uniform lp noise
# The Monte-Carlo radius r_eps is compared with the worst-case distance ||r*||_p.
# For a linear classifier the ratio grows like sqrt(d): random noise has to be
# much larger than an adversarial perturbation to flip the label.

# %%
import numpy as np

from noiserobust import bounds as B
from noiserobust.datasets import make_blobs
from noiserobust.geometry import min_perturbation
from noiserobust.models import TrainConfig, train_logistic
from noiserobust.noise import LpNoise
from noiserobust.robustness import Bisection, RobustnessQuery, robustness_radius

d, eps = 400, 0.015
data = make_blobs(d, 1000, 6.0, seed=0)
model = train_logistic(data, TrainConfig(epochs=300)).model
x = data.X[0]

# %% Ratio radius / ||r*|| against the lp factor and the rough estimate.
for p in (1, 2, 3, np.inf):
    r = min_perturbation(model, x, p).norm
    est = B.robustness_estimate(p, d, r)
    res = robustness_radius(model, RobustnessQuery(x, LpNoise(p), eps, 10_000, seed=1,
                                                   search=Bisection(0.0, est)))
    print(f"p={p:>4}: ratio {res.radius / r:8.2f}, factor {B.lp_factor(model.w, p):8.2f}, "
          f"estimate ratio {est / r:8.2f}")

# %% The bounds carry constants that need calibration; with the defaults they are wide.
rep = B.lp_bounds(model.w, 2, 1e-3)
print(f"eps=1e-3, p=2: ratio in [{rep.lower:.3f}, {rep.upper:.3f}] (valid={rep.valid})")
