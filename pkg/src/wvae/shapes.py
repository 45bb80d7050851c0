"""Procedural 2D-shapes dataset with ground-truth generative factors.

Images are binary 32×32 rasters of a square, ellipse or triangle, varied by
scale, orientation and (x, y) position. Pixels are lit when their centre
falls inside the rotated, translated shape.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

FACTOR_NAMES = ("shape", "scale", "orientation", "pos_x", "pos_y")
SHAPE_NAMES = ("square", "ellipse", "triangle")


@dataclass(frozen=True)
class FactorSpace:
    shape: int = 3
    scale: int = 6
    orientation: int = 8
    pos_x: int = 16
    pos_y: int = 16
    canvas: int = 32

    def __post_init__(self):
        if min(self.counts) < 1:
            raise ValueError(f"factor counts must be >= 1, got {self.counts}")
        if not 1 <= self.shape <= len(SHAPE_NAMES):
            raise ValueError(f"at most {len(SHAPE_NAMES)} shapes are available")

    @property
    def counts(self) -> tuple[int, ...]:
        return (self.shape, self.scale, self.orientation, self.pos_x, self.pos_y)

    @property
    def num_factors(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def validate(self, f) -> tuple[int, ...]:
        f = tuple(int(v) for v in f)
        if len(f) != self.num_factors:
            raise ValueError(f"expected {self.num_factors} factor indices, got {len(f)}")
        for name, v, n in zip(FACTOR_NAMES, f, self.counts):
            if not 0 <= v < n:
                raise ValueError(f"factor {name}={v} out of range [0, {n})")
        return f

    def index_of(self, factors) -> np.ndarray:
        """Lexicographic item index (last factor fastest) of factor rows."""
        return np.ravel_multi_index(np.asarray(factors).T, self.counts)

    def factors_of(self, index) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(index), self.counts), axis=-1)


def _size(space: FactorSpace, i) -> np.ndarray:
    # full extent (side / major diameter) as a fraction of the canvas
    return (0.15 + 0.06 * np.asarray(i, dtype=np.float64)) * space.canvas


def _centre(space: FactorSpace, i, count: int) -> np.ndarray:
    margin = 0.5 * _size(space, space.scale - 1)
    i = np.asarray(i, dtype=np.float64)
    if count == 1:
        return np.full(i.shape, space.canvas / 2.0)
    return margin + (space.canvas - 2 * margin) * i / (count - 1)


def render_batch(factors, space: FactorSpace = FactorSpace()) -> np.ndarray:
    """Render rows of factor indices into an (N, canvas, canvas) uint8 array of 0/1."""
    factors = np.atleast_2d(np.asarray(factors, dtype=np.int64))
    if factors.shape[1] != space.num_factors:
        raise ValueError(f"expected {space.num_factors} factor columns, got {factors.shape[1]}")
    if factors.size and ((factors < 0).any() or (factors >= np.asarray(space.counts)).any()):
        bad = factors[((factors < 0) | (factors >= np.asarray(space.counts))).any(axis=1)][0]
        raise ValueError(f"factor tuple {tuple(bad)} out of range for counts {space.counts}")

    shape, scale, orient, px, py = (factors[:, j][:, None, None] for j in range(5))
    h = 0.5 * _size(space, scale)
    angle = 2.0 * np.pi * orient / space.orientation
    cx = _centre(space, px, space.pos_x)
    cy = _centre(space, py, space.pos_y)

    grid = np.arange(space.canvas) + 0.5
    dx = grid[None, None, :] - cx
    dy = grid[None, :, None] - cy
    cos, sin = np.cos(angle), np.sin(angle)
    # rotate pixel centres into the shape's frame
    u = cos * dx + sin * dy
    v = -sin * dx + cos * dy

    square = (np.abs(u) <= h) & (np.abs(v) <= h)
    ellipse = (u / h) ** 2 + (v / (0.5 * h)) ** 2 <= 1.0
    # isosceles triangle: apex at (0, -h), base from (-h, h) to (h, h)
    triangle = (v <= h) & (2.0 * u - v <= h) & (-2.0 * u - v <= h)
    out = np.where(shape == 0, square, np.where(shape == 1, ellipse, triangle))
    return out.astype(np.uint8)


def render_shape(f, space: FactorSpace = FactorSpace()) -> np.ndarray:
    """Binary canvas×canvas float image for one factor tuple."""
    f = space.validate(f)
    return render_batch([f], space)[0].astype(np.float64)


def all_factors(space: FactorSpace = FactorSpace()) -> np.ndarray:
    return np.array(list(itertools.product(*(range(n) for n in space.counts))), dtype=np.int64)


def enumerate_dataset(space: FactorSpace = FactorSpace(), chunk: int = 4096):
    """Every factor combination in lexicographic order.

    Returns ``(images, factors)``: uint8 0/1 images of shape (N, canvas, canvas)
    and an (N, 5) integer array of factor indices.
    """
    factors = all_factors(space)
    images = np.empty((len(factors), space.canvas, space.canvas), dtype=np.uint8)
    for i in range(0, len(factors), chunk):
        images[i : i + chunk] = render_batch(factors[i : i + chunk], space)
    return images, factors


def _fixed_factor_tuples(space: FactorSpace, k: int, value: int, n: int, rng) -> np.ndarray:
    if not 0 <= k < space.num_factors:
        raise ValueError(f"factor index {k} out of range [0, {space.num_factors})")
    if not 0 <= value < space.counts[k]:
        raise ValueError(f"value {value} out of range for factor {FACTOR_NAMES[k]}")
    factors = np.stack([rng.integers(0, c, size=n) for c in space.counts], axis=1)
    factors[:, k] = value
    return factors


def sample_fixed_factor(space: FactorSpace, k: int, value: int, n: int, rng):
    """``n`` images with factor ``k`` pinned to ``value``, other factors uniform."""
    factors = _fixed_factor_tuples(space, k, value, n, rng)
    return render_batch(factors, space).astype(np.float64), factors


class ShapesDataset:
    """Fully enumerated shapes dataset; fixed-factor sampling by table lookup."""

    def __init__(self, space: FactorSpace = FactorSpace()):
        self.space = space
        self.images, self.factors = enumerate_dataset(space)

    def __len__(self) -> int:
        return len(self.images)

    @property
    def num_factors(self) -> int:
        return self.space.num_factors

    def flat(self, index=slice(None)) -> np.ndarray:
        imgs = self.images[index]
        return imgs.reshape(len(imgs), -1).astype(np.float64)

    def sample_fixed_factor(self, k: int, value: int, n: int, rng):
        """Same draws and images as :func:`sample_fixed_factor`, without re-rendering."""
        factors = _fixed_factor_tuples(self.space, k, value, n, rng)
        return self.images[self.space.index_of(factors)].astype(np.float64), factors
