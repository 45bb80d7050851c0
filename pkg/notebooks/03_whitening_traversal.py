"""
Whitening the latent space and traversing it
============================================

Fit PCA whitening on the encodings of a trained model, inspect the
eigen-spectrum and render traversals in raw and whitened coordinates.
Run ``02_training.py`` first; it leaves ``vae.llab`` behind.
"""

# %%
import numpy as np

from wvae.persistence import load_checkpoint, save_transform, write_spectrum
from wvae.render import traversal_grid, write_pgm
from wvae.shapes import FactorSpace, ShapesDataset
from wvae.whitening import fit_whitening, spectrum, unwhiten, whiten

data = ShapesDataset(FactorSpace(shape=3, scale=3, orientation=4, pos_x=8, pos_y=8))
model = load_checkpoint("vae.llab")

Z = model.encode_mean(data.flat())
T = fit_whitening(Z)
print("eigenvalues", np.round(spectrum(T), 3))
print("degenerate dims", int(T.degenerate.sum()))

# %%
# Whitened codes have identity covariance; the map is exactly invertible.
W = whiten(Z, T)
print("max |cov - I|", np.abs(np.cov(W, rowvar=False) - np.eye(T.dim)).max())
print("round trip", np.abs(unwhiten(W, T) - Z).max())

# %%
# Reconstruction does not change: decoding z or unwhiten(whiten(z)) is the same.
z = Z[:100]
print("decode diff", np.abs(model.decode_probs(z) - model.decode_probs(unwhiten(whiten(z, T), T))).max())

# %%
# Traversals. Raw: sweep each latent coordinate. Whitened: sweep each
# principal direction, scaled to unit variance. The leftmost column is the
# decoded anchor.
i = 123
dims = list(range(T.dim))
raw = traversal_grid(model.decode_probs, Z[i], dims, (-2, 2), 7)
white = traversal_grid(model.decode_probs, W[i], dims, (-2, 2), 7, transform=T)
write_pgm(raw, "traversal_raw.pgm")
write_pgm(white, "traversal_whitened.pgm")

save_transform("vae.lwht", T)
write_spectrum(spectrum(T), "spectrum.csv")
