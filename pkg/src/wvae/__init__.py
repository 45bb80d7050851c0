"""Variational auto-encoders with post-hoc PCA whitening of the latent space.

A small numpy toolkit: reverse-mode autodiff, MLP VAEs (plain, beta, factor),
PCA whitening of trained latents, latent traversals and the majority-vote
disentanglement score on a procedural 2D-shapes dataset.
"""

from wvae.tensor import Tensor, backward, grad_check, matmul
from wvae.nn import VAE, DenseLayer, EncoderOutput, RMSprop
from wvae.objectives import (
    Discriminator,
    TrainConfig,
    beta_vae_loss,
    factor_vae_loss,
    train,
    vae_loss,
)
from wvae.whitening import WhiteningTransform, fit_whitening, jacobi_eigh, unwhiten, whiten
from wvae.shapes import FactorSpace, ShapesDataset, enumerate_dataset, render_shape
from wvae.metric import MetricConfig, evaluate

__version__ = "0.1.0"
