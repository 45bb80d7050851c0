"""
The majority-vote disentanglement score
=======================================

Score three encoders: the identity oracle, a factor-blind Gaussian, and a
trained VAE before and after whitening. Run ``02`` and ``03`` first.
"""

# %%
import numpy as np

from wvae.metric import MetricConfig, evaluate, identity_oracle, mean_encoder
from wvae.persistence import load_checkpoint, load_transform
from wvae.shapes import FactorSpace, ShapesDataset

data = ShapesDataset(FactorSpace(shape=3, scale=3, orientation=4, pos_x=8, pos_y=8))
config = MetricConfig(L=64, M_train=500, M_test=500, seed=0)

# %%
# Codes that equal the factors give a perfect score.
print("identity oracle", evaluate(data, identity_oracle, config).score)

# %%
# Codes that ignore the image vote at random, near 1/5 for five factors.
rng = np.random.default_rng(0)
blind = lambda images, factors: rng.standard_normal((len(images), 10))
print("factor-blind", evaluate(data, blind, config).score)

# %%
# A trained model, raw and whitened.
model = load_checkpoint("vae.llab")
T = load_transform("vae.lwht")
raw = evaluate(data, mean_encoder(model), config)
white = evaluate(data, mean_encoder(model, T), config)
print("vae", raw.score, "whitened", white.score)

# which latent dimension each factor's votes landed in
for name, res in [("raw", raw), ("whitened", white)]:
    table = np.zeros((5, model.latent_dim), dtype=int)
    for v in res.votes_train:
        table[v.k, v.dstar] += 1
    print(name)
    print(table)
