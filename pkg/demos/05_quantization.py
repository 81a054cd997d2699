# %% [markdown]
# # How many bits does a classifier need?
# Quantization noise behaves roughly like uniform linf noise of half-width step/2,
# so the linf distance to the boundary predicts the coarsest safe bit depth.

# %%
import numpy as np

from noiserobust import bounds as B
from noiserobust.datasets import make_blob_images
from noiserobust.models import TrainConfig, train_mlp
from noiserobust.quantize import min_bits_preserving_label, quantize_image

q = B.quantization_prediction(0.05, 224 * 224 * 3)
print(f"r*=0.05 at ImageNet size: step {q.delta:.2f}, levels {q.levels:.2f}, bits {q.bits:.2f}")

# %%
x = np.linspace(0, 255, 8)
print("2-bit:", quantize_image(x, 2))
print("2-bit dithered:", quantize_image(x, 2, dither=True, seed=1))

# %% Predicted vs measured depth on small synthetic images.
data = make_blob_images(600, seed=0)
model = train_mlp(data.subset(slice(0, 500)), TrainConfig(epochs=300, hidden=(16,))).model
for i in range(500, 510):
    rep = min_bits_preserving_label(model, data.X[i], dither=True, seed=i)
    print(f"log2 r* {np.log2(rep.r_star_inf):6.2f}: predicted {rep.predicted_depth}, "
          f"measured {rep.measured_bits}")
