"""Majority-vote disentanglement score.

Each vote fixes one generative factor, encodes a batch of images that share
that factor value, normalises the codes by the corpus standard deviation
and records the latent dimension with the smallest variance. A classifier
mapping each dimension to its most frequent factor is built from training
votes and scored on held-out votes.

Encoders are callables ``encode(images, factors) -> codes``; model-based
encoders ignore ``factors``, the identity oracle returns them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from wvae.whitening import WhiteningTransform, whiten

Encoder = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class MetricConfig:
    L: int = 64
    M_train: int = 500
    M_test: int = 500
    collapse_threshold: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.M_train < 1 or self.M_test < 1:
            raise ValueError("M_train and M_test must be >= 1")


@dataclass(frozen=True)
class Vote:
    dstar: int
    k: int


@dataclass
class RescaleVector:
    s: np.ndarray
    collapsed: np.ndarray


def empirical_std(Z, collapse_threshold: float = 0.05) -> RescaleVector:
    """Per-dimension std (N-1 denominator); dims below threshold * max(std) are collapsed."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ValueError(f"need at least two codes, got shape {Z.shape}")
    s = Z.std(axis=0, ddof=1)
    top = s.max()
    if top <= 0:
        return RescaleVector(s, np.ones(s.shape, dtype=bool))
    return RescaleVector(s, s / top < collapse_threshold)


class AllCollapsedError(ValueError):
    pass


def vote_from_codes(Z, k: int, rescale: RescaleVector) -> Vote:
    active = ~rescale.collapsed
    if not active.any():
        raise AllCollapsedError("every latent dimension is collapsed")
    var = np.full(rescale.s.shape, np.inf)
    var[active] = (np.asarray(Z)[:, active] / rescale.s[active]).var(axis=0, ddof=1)
    # argmin returns the lowest index on ties
    return Vote(int(np.argmin(var)), int(k))


def cast_vote(sampler, encoder: Encoder, k: int, rescale: RescaleVector, L: int, rng) -> Vote:
    """One vote: fix factor ``k`` at a random value, encode ``L`` images, pick the min-variance dim.

    ``sampler(k, value, n, rng) -> (images, factors)`` and must expose
    ``counts`` (values per factor) as ``sampler.counts``.
    """
    value = int(rng.integers(0, sampler.counts[k]))
    images, factors = sampler(k, value, L, rng)
    return vote_from_codes(encoder(images, factors), k, rescale)


def majority_classifier(votes: list[Vote]) -> dict[int, int]:
    if not votes:
        raise ValueError("no training votes")
    counts: dict[int, dict[int, int]] = {}
    for v in votes:
        counts.setdefault(v.dstar, {}).setdefault(v.k, 0)
        counts[v.dstar][v.k] += 1
    return {d: min(c, key=lambda k: (-c[k], k)) for d, c in counts.items()}


def score(votes_train: list[Vote], votes_test: list[Vote]) -> float:
    """Accuracy of the majority-vote classifier; unseen dimensions predict factor 0."""
    clf = majority_classifier(votes_train)
    if not votes_test:
        raise ValueError("no test votes")
    hits = sum(clf.get(v.dstar, 0) == v.k for v in votes_test)
    return hits / len(votes_test)


class FixedFactorSampler:
    """Adapts a dataset (or a bare FactorSpace) to the ``sampler`` protocol."""

    def __init__(self, source):
        from wvae.shapes import FactorSpace, sample_fixed_factor

        self.source = source
        if isinstance(source, FactorSpace):
            self.space = source
            self._draw = lambda k, value, n, rng: sample_fixed_factor(source, k, value, n, rng)
        else:
            self.space = source.space
            self._draw = source.sample_fixed_factor
        self.counts = self.space.counts

    def __call__(self, k, value, n, rng):
        images, factors = self._draw(k, value, n, rng)
        return images.reshape(len(images), -1), factors


@dataclass
class MetricResult:
    score: float
    votes_train: list[Vote] = field(default_factory=list)
    votes_test: list[Vote] = field(default_factory=list)
    rescale: RescaleVector | None = None


def evaluate(dataset, encoder: Encoder, config: MetricConfig = MetricConfig()) -> MetricResult:
    """Score an encoder on a dataset with ground-truth factors.

    ``dataset`` needs ``images``, ``factors``, ``space`` and
    ``sample_fixed_factor`` (see :class:`wvae.shapes.ShapesDataset`). The
    std rescaling is computed on the whole corpus. Vote ``i`` draws from its
    own seed stream, so results depend only on ``config.seed``.
    """
    flat = dataset.images.reshape(len(dataset.images), -1)
    Z = np.concatenate(
        [encoder(flat[i : i + 4096].astype(np.float64), dataset.factors[i : i + 4096]) for i in range(0, len(flat), 4096)]
    )
    rescale = empirical_std(Z, config.collapse_threshold)
    sampler = FixedFactorSampler(dataset)
    num_factors = len(sampler.counts)

    streams = np.random.SeedSequence(config.seed).spawn(config.M_train + config.M_test)
    votes = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        k = int(rng.integers(0, num_factors))
        votes.append(cast_vote(sampler, encoder, k, rescale, config.L, rng))
    train_votes, test_votes = votes[: config.M_train], votes[config.M_train :]
    return MetricResult(score(train_votes, test_votes), train_votes, test_votes, rescale)


def identity_oracle(images, factors) -> np.ndarray:
    """Perfectly disentangled encoder: the code is the factor vector itself."""
    return np.asarray(factors, dtype=np.float64)


def mean_encoder(model, transform: WhiteningTransform | None = None) -> Encoder:
    """Posterior-mean encoder, optionally followed by whitening."""

    def encode(images, factors=None):
        mu = model.encode_mean(images)
        return mu if transform is None else whiten(mu, transform)

    return encode


def sampled_encoder(model, rng, transform: WhiteningTransform | None = None) -> Encoder:
    """Stochastic encoder drawing z = mu + sigma * eps."""
    from wvae.nn import reparameterize
    from wvae.tensor import Tensor

    def encode(images, factors=None):
        enc = model.encode(Tensor(np.asarray(images, dtype=np.float64)))
        z = reparameterize(enc, rng.standard_normal(enc.mu.shape)).data
        return z if transform is None else whiten(z, transform)

    return encode


def write_votes(votes: list[Vote], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vote_index", "dstar", "k"])
        for i, v in enumerate(votes):
            w.writerow([i, v.dstar, v.k])


def read_votes(path) -> list[Vote]:
    with open(path, newline="") as fh:
        return [Vote(int(r["dstar"]), int(r["k"])) for r in csv.DictReader(fh)]
