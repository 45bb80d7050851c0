"""Training objectives (VAE, beta-VAE, Factor-VAE) and the training loop.

All losses are the negated ELBO-style objectives, so they are minimized.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from wvae import tensor as T
from wvae.nn import (
    VAE,
    RMSprop,
    bernoulli_recon,
    gaussian_kl,
    mlp,
    reparameterize,
    run_layers,
)
from wvae.tensor import Tensor

log = logging.getLogger(__name__)

OBJECTIVES = ("vae", "beta_vae", "factor_vae")


@dataclass
class TrainConfig:
    objective: str = "vae"
    beta: float = 4.0
    gamma: float = 6.4
    latent_dim: int = 10
    hidden: tuple[int, ...] = (1024, 512)
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    disc_hidden: tuple[int, ...] = (256, 256, 256)
    disc_lr: float = 1e-4

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        self.disc_hidden = tuple(self.disc_hidden)
        self.validate()

    def validate(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.objective == "beta_vae" and self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["disc_hidden"] = list(self.disc_hidden)
        return d


class Discriminator:
    """MLP from a latent code to one logit: large for q(z), small for the product of marginals."""

    def __init__(self, latent_dim: int, hidden: Sequence[int] = (256, 256, 256), rng=None):
        rng = np.random.default_rng() if rng is None else rng
        self.latent_dim = latent_dim
        self.layers = mlp([latent_dim, *hidden, 1], "relu", "identity", rng)

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def __call__(self, z) -> Tensor:
        z = T.as_tensor(z)
        if z.shape[-1] != self.latent_dim:
            raise ValueError(f"discriminator expects width {self.latent_dim}, got {z.shape}")
        return run_layers(self.layers, z)


def vae_loss(x, model: VAE, noise):
    enc = model.encode(x)
    z = reparameterize(enc, noise)
    recon = bernoulli_recon(x, model.decode(z))
    kl = gaussian_kl(enc)
    return recon + kl, recon, kl


def beta_vae_loss(x, model: VAE, noise, beta: float):
    if beta < 1:
        raise ValueError("beta must be >= 1")
    enc = model.encode(x)
    z = reparameterize(enc, noise)
    recon = bernoulli_recon(x, model.decode(z))
    kl = gaussian_kl(enc)
    return recon + kl * beta, recon, kl


def permute_dims(z, rng) -> np.ndarray:
    """Shuffle each latent column independently across the batch.

    Rows of the result are samples from the product of the batch marginals.
    """
    z = np.asarray(z.data if isinstance(z, Tensor) else z, dtype=np.float64)
    out = np.empty_like(z)
    for j in range(z.shape[1]):
        out[:, j] = z[rng.permutation(z.shape[0]), j]
    return out


def tc_estimate(z, disc: Discriminator) -> Tensor:
    """Density-ratio estimate of total correlation: mean discriminator logit."""
    logits = disc(z)
    if not np.isfinite(logits.data).all():
        raise FloatingPointError("discriminator produced a non-finite logit")
    return T.mean(logits)


def factor_vae_loss(x, model: VAE, disc: Discriminator, noise, gamma: float):
    """recon + kl + gamma * TC; the caller must not step the discriminator on these grads."""
    return _factor_vae_terms(x, model, disc, noise, gamma)[:4]


def _factor_vae_terms(x, model, disc, noise, gamma):
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    enc = model.encode(x)
    z = reparameterize(enc, noise)
    recon = bernoulli_recon(x, model.decode(z))
    kl = gaussian_kl(enc)
    tc = tc_estimate(z, disc)
    return recon + kl + tc * gamma, recon, kl, tc, z


def discriminator_step(z_real, z_perm, disc: Discriminator, opt: RMSprop) -> float:
    """One BCE step (label 1 for real codes, 0 for permuted). Returns pre-step accuracy."""
    z_real = np.asarray(z_real.data if isinstance(z_real, Tensor) else z_real)
    z_perm = np.asarray(z_perm.data if isinstance(z_perm, Tensor) else z_perm)
    opt.zero_grad()
    logit_real = disc(z_real)
    logit_perm = disc(z_perm)
    loss = T.mean(T.softplus(-logit_real)) + T.mean(T.softplus(logit_perm))
    loss.backward()
    opt.step()
    correct = np.sum(logit_real.data > 0) + np.sum(logit_perm.data < 0)
    return float(correct) / (len(z_real) + len(z_perm))


@dataclass
class EpochStats:
    epoch: int
    recon: float
    kl: float
    tc: float = 0.0


@dataclass
class TrainResult:
    model: VAE
    curves: list[EpochStats] = field(default_factory=list)
    discriminator: Discriminator | None = None
    disc_accuracy: list[float] = field(default_factory=list)

    def __iter__(self):
        return iter((self.model, self.curves))


def _flat_images(dataset) -> np.ndarray:
    images = getattr(dataset, "images", dataset)
    images = np.asarray(images)
    return images.reshape(len(images), -1)


def train(dataset, config: TrainConfig, progress: bool = False) -> TrainResult:
    """Train a VAE-family model with RMSprop on minibatches.

    ``dataset`` is an array of images (N×H×W or N×P, intensities in [0, 1])
    or any object with such an ``images`` attribute. The result unpacks as
    ``model, curves``; curves hold per-epoch batch means of recon, KL and TC.
    Runs are deterministic given ``config.seed``.
    """
    config.validate()
    images = _flat_images(dataset)
    n = len(images)
    if n == 0:
        raise ValueError("dataset is empty")
    # uint8 storage gets converted per batch
    scale = 1.0 / 255.0 if images.dtype == np.uint8 and images.max() > 1 else 1.0

    init_ss, order_ss, noise_ss, disc_ss, perm_ss = np.random.SeedSequence(config.seed).spawn(5)
    model = VAE(
        images.shape[1],
        config.latent_dim,
        config.hidden,
        objective=config.objective,
        rng=np.random.default_rng(init_ss),
    )
    opt = RMSprop(model.parameters(), config.lr, config.rho, config.eps)
    order_rng = np.random.default_rng(order_ss)
    noise_rng = np.random.default_rng(noise_ss)

    disc = disc_opt = perm_rng = None
    if config.objective == "factor_vae":
        disc = Discriminator(config.latent_dim, config.disc_hidden, np.random.default_rng(disc_ss))
        disc_opt = RMSprop(disc.parameters(), config.disc_lr, config.rho, config.eps)
        perm_rng = np.random.default_rng(perm_ss)

    result = TrainResult(model, discriminator=disc)
    bs = config.batch_size
    for epoch in range(config.epochs):
        perm = order_rng.permutation(n)
        sums = np.zeros(3)
        steps = 0
        for step, start in enumerate(range(0, n, bs)):
            x = images[perm[start : start + bs]].astype(np.float64) * scale
            noise = noise_rng.standard_normal((len(x), config.latent_dim))
            opt.zero_grad()
            try:
                if config.objective == "vae":
                    total, recon, kl = vae_loss(x, model, noise)
                    tc_val = 0.0
                elif config.objective == "beta_vae":
                    total, recon, kl = beta_vae_loss(x, model, noise, config.beta)
                    tc_val = 0.0
                else:
                    total, recon, kl, tc, z = _factor_vae_terms(x, model, disc, noise, config.gamma)
                    z_real = z.data.copy()
                    tc_val = tc.item()
                if not np.isfinite(total.data):
                    raise FloatingPointError(f"loss became {total.item()}")
            except FloatingPointError as e:
                raise FloatingPointError(f"{e} at epoch {epoch}, step {step}") from e
            total.backward()
            opt.step()
            if disc is not None:
                acc = discriminator_step(z_real, permute_dims(z_real, perm_rng), disc, disc_opt)
                result.disc_accuracy.append(acc)
            sums += (recon.item(), kl.item(), tc_val)
            steps += 1
        stats = EpochStats(epoch, *(sums / steps))
        result.curves.append(stats)
        if progress:
            log.info("epoch %d recon %.3f kl %.3f tc %.3f", epoch, stats.recon, stats.kl, stats.tc)
    return result

