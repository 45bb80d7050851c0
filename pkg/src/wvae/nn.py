"""Dense layers, the VAE encoder/decoder pair, ELBO terms and RMSprop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from wvae import tensor as T
from wvae.tensor import Tensor, ShapeError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")
LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0


class DenseLayer:
    """Affine map ``x @ W.T + b`` followed by an activation."""

    def __init__(self, n_in: int, n_out: int, activation: str = "relu", rng=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng() if rng is None else rng
        # He init for relu, Glorot otherwise
        scale = np.sqrt(2.0 / n_in) if activation == "relu" else np.sqrt(1.0 / n_in)
        self.weight = Tensor(rng.standard_normal((n_out, n_in)) * scale, requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)
        self.activation = activation

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"layer expects width {self.n_in}, got {x.shape}")
        h = T.linear(x, self.weight, self.bias)
        if self.activation == "identity":
            return h
        return T.elementwise(self.activation, h)


def mlp(sizes: Sequence[int], hidden_activation: str, out_activation: str, rng) -> list[DenseLayer]:
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        layers.append(DenseLayer(n_in, n_out, out_activation if last else hidden_activation, rng))
    return layers


def run_layers(layers: Sequence[DenseLayer], x: Tensor) -> Tensor:
    for layer in layers:
        x = layer(x)
    return x


@dataclass
class EncoderOutput:
    mu: Tensor
    logvar: Tensor

    def __post_init__(self):
        if self.mu.shape != self.logvar.shape:
            raise ShapeError(f"mu {self.mu.shape} and logvar {self.logvar.shape} differ")


class VAE:
    """MLP encoder q(z|x) and Bernoulli-logit decoder p(x|z).

    The encoder's last layer emits ``2*latent_dim`` columns: means first,
    log-variances second (clamped to [-10, 10]).
    """

    def __init__(
        self,
        n_pixels: int,
        latent_dim: int = 10,
        hidden: Sequence[int] = (1024, 512),
        activation: str = "relu",
        objective: str = "vae",
        rng=None,
    ):
        if latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        rng = np.random.default_rng() if rng is None else rng
        self.n_pixels = n_pixels
        self.latent_dim = latent_dim
        self.hidden = tuple(hidden)
        self.activation = activation
        self.objective = objective
        self.encoder = mlp([n_pixels, *self.hidden, 2 * latent_dim], activation, "identity", rng)
        self.decoder = mlp([latent_dim, *self.hidden[::-1], n_pixels], activation, "identity", rng)

    @property
    def layers(self) -> list[DenseLayer]:
        return self.encoder + self.decoder

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def encode(self, x) -> EncoderOutput:
        h = run_layers(self.encoder, T.as_tensor(x))
        d = self.latent_dim
        mu = T.columns(h, 0, d)
        logvar = T.clip(T.columns(h, d, 2 * d), LOGVAR_MIN, LOGVAR_MAX)
        return EncoderOutput(mu, logvar)

    def decode(self, z) -> Tensor:
        """Pixel logits for latent codes ``z`` (N×d)."""
        return run_layers(self.decoder, T.as_tensor(z))

    def encode_mean(self, x: np.ndarray, batch_size: int = 4096) -> np.ndarray:
        """Posterior means for a plain array of flattened images, without a graph."""
        x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        out = [self.encode(Tensor(x[i : i + batch_size])).mu.data for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.latent_dim))

    def decode_probs(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        return T.sigmoid(self.decode(Tensor(z))).data

    def architecture(self) -> dict:
        return {
            "n_pixels": self.n_pixels,
            "latent_dim": self.latent_dim,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "objective": self.objective,
            "layers": [[l.n_in, l.n_out, l.activation] for l in self.layers],
        }

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        n = sum(p.size for p in self.parameters())
        if flat.size != n:
            raise ShapeError(f"expected {n} parameters, got {flat.size}")
        i = 0
        for p in self.parameters():
            p.data = flat[i : i + p.size].reshape(p.shape).copy()
            i += p.size


def reparameterize(enc: EncoderOutput, noise) -> Tensor:
    """z = mu + exp(logvar / 2) * noise, with externally drawn noise."""
    noise = T.as_tensor(noise)
    if noise.shape != enc.mu.shape:
        raise ShapeError(f"noise {noise.shape} does not match mu {enc.mu.shape}")
    return enc.mu + T.exp(enc.logvar * 0.5) * noise


def gaussian_kl(enc: EncoderOutput) -> Tensor:
    """Batch mean of KL(N(mu, sigma^2) || N(0, I)), summed over latent dims."""
    mu, logvar = enc.mu, enc.logvar
    if not (np.isfinite(mu.data).all() and np.isfinite(logvar.data).all()):
        raise FloatingPointError("non-finite encoder output")
    per_entry = T.square(mu) + T.exp(logvar) - logvar - 1.0
    kl = T.tensor_sum(per_entry) * (0.5 / mu.shape[0])
    if not np.isfinite(kl.data):
        raise FloatingPointError("KL term is not finite")
    return kl


def bernoulli_recon(x, logits: Tensor) -> Tensor:
    """Batch mean of the negative Bernoulli log-likelihood, summed over pixels."""
    x = T.as_tensor(x)
    if x.shape != logits.shape:
        raise ShapeError(f"images {x.shape} and logits {logits.shape} differ")
    if x.data.size and (x.data.min() < 0 or x.data.max() > 1):
        raise ValueError("pixel intensities must lie in [0, 1]")
    per_pixel = T.softplus(logits) - x * logits
    return T.tensor_sum(per_pixel) * (1.0 / logits.shape[0])


class RMSprop:
    """acc <- rho*acc + (1-rho)*g^2;  p <- p - lr*g/(sqrt(acc) + eps)."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, rho: float = 0.9, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.acc = [np.zeros(p.shape) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise RuntimeError(f"parameter {i} of shape {p.shape} has no gradient")
        for p, acc in zip(self.params, self.acc):
            g = p.grad
            acc *= self.rho
            sq = np.multiply(g, g)
            sq *= 1.0 - self.rho
            acc += sq
            denom = np.sqrt(acc, out=sq)
            denom += self.eps
            step = np.multiply(g, self.lr)
            step /= denom
            p.data -= step


def rmsprop_step(state: RMSprop, params=None, grads=None) -> None:
    """Functional form: optionally install ``grads`` on ``params``, then step."""
    if grads is not None:
        for p, g in zip(params if params is not None else state.params, grads):
            p.grad = np.asarray(g, dtype=np.float64)
    state.step()
