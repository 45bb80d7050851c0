"""
Training a VAE on procedural shapes
===================================

Render a reduced shapes grid, train a plain VAE and a beta-VAE on it and
compare their final reconstruction and KL terms. Runs in about a minute.
"""

# %%
import numpy as np

from wvae.objectives import TrainConfig, train
from wvae.persistence import save_checkpoint, write_curves
from wvae.render import reconstruction_panel, write_pgm
from wvae.shapes import FactorSpace, ShapesDataset

space = FactorSpace(shape=3, scale=3, orientation=4, pos_x=8, pos_y=8)
data = ShapesDataset(space)
print(len(data), "images of", data.images.shape[1:])

# %%
# Same seed for both runs, so only the KL weight differs.
common = dict(latent_dim=6, hidden=(128, 64), batch_size=64, epochs=8, seed=0)
vae = train(data, TrainConfig(objective="vae", **common))
beta = train(data, TrainConfig(objective="beta_vae", beta=4.0, **common))

for name, run in [("vae", vae), ("beta=4", beta)]:
    first, last = run.curves[0], run.curves[-1]
    print(f"{name:7s} recon {first.recon:7.2f} -> {last.recon:7.2f}   kl {last.kl:5.2f}")

# %%
# Posterior-mean reconstructions of a few images, originals on top.
idx = np.random.default_rng(1).choice(len(data), 8, replace=False)
x = data.flat(idx)
recon = vae.model.decode_probs(vae.model.encode_mean(x))
write_pgm(reconstruction_panel(x, recon), "recon_panel.pgm")

save_checkpoint("vae.llab", vae.model)
write_curves(vae.curves, "vae_curves.csv")
