# %% [markdown]
# # Distance to the decision boundary
# Closed form for linear models; a linearize-and-project search for an MLP.

# %%
import numpy as np

from noiserobust.datasets import make_blobs
from noiserobust.geometry import min_perturbation
from noiserobust.models import LinearModel, TrainConfig, label, train_mlp
from noiserobust.noise import lp_norm

# %% A hyperplane: the lp distance is |f(x)| / ||w||_q with 1/p + 1/q = 1.
m = LinearModel(np.array([3.0, 4.0]), 0.0)
x = np.array([1.0, 0.0])
for p in (1, 2, np.inf):
    adv = min_perturbation(m, x, p)
    print(f"p={p}: r* = {np.round(adv.r_star, 4)}, norm {adv.norm:.4f}, f(x+r*) = {m.scores(x + adv.r_star):.1e}")

# %% A small MLP on three Gaussian clusters.
data = make_blobs(6, 600, 4.0, seed=1, classes=3)
mlp = train_mlp(data, TrainConfig(epochs=300, hidden=(12,))).model
x = data.X[0]
for p in (2, np.inf):
    adv = min_perturbation(mlp, x, p)
    print(f"p={p}: ||r*|| = {adv.norm:.4f} in {adv.iterations} steps, "
          f"label {label(mlp, x)} -> {label(mlp, x + adv.r_star)}")
