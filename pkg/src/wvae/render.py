"""Latent traversal grids, reconstruction panels and binary PGM output."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from wvae.whitening import WhiteningTransform, unwhiten

GUTTER = 128 / 255.0


def tile_grid(tiles) -> np.ndarray:
    """Arrange a (rows, cols, H, W) stack into one image with 1-pixel mid-grey gutters.

    Width is ``cols*W + (cols-1)`` and height ``rows*H + (rows-1)``.
    """
    tiles = np.asarray(tiles, dtype=np.float64)
    rows, cols, h, w = tiles.shape
    out = np.full((rows * h + rows - 1, cols * w + cols - 1), GUTTER)
    for r in range(rows):
        for c in range(cols):
            out[r * (h + 1) : r * (h + 1) + h, c * (w + 1) : c * (w + 1) + w] = tiles[r, c]
    return out


def to_bytes(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.size and (image.min() < 0 or image.max() > 1):
        raise ValueError("intensities must lie in [0, 1]")
    return np.rint(image * 255.0).astype(np.uint8)


def write_pgm(image, path) -> None:
    """Binary P5 greyscale file, byte = round(255 * intensity)."""
    pixels = to_bytes(image)
    if pixels.ndim != 2:
        raise ValueError(f"expected a 2-d image, got shape {pixels.shape}")
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def traversal_codes(
    z_base,
    dims: Sequence[int],
    value_range: tuple[float, float] = (-2.0, 2.0),
    steps: int = 7,
    transform: WhiteningTransform | None = None,
) -> np.ndarray:
    """Decoder inputs for a traversal, shape (len(dims), steps, d).

    With a transform, ``z_base`` is in whitened coordinates and every swept
    code is mapped back through :func:`unwhiten`.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    z_base = np.asarray(z_base, dtype=np.float64).reshape(-1)
    d = z_base.shape[0]
    for j in dims:
        if not 0 <= j < d:
            raise ValueError(f"traversal dimension {j} out of range [0, {d})")
    sweep = np.linspace(value_range[0], value_range[1], steps)
    codes = np.repeat(np.repeat(z_base[None, None, :], len(dims), 0), steps, 1)
    for r, j in enumerate(dims):
        codes[r, :, j] = sweep
    if transform is not None:
        codes = unwhiten(codes.reshape(-1, d), transform).reshape(codes.shape)
    return codes


def traversal_grid(
    decode: Callable[[np.ndarray], np.ndarray],
    z_base,
    dims: Sequence[int],
    value_range: tuple[float, float] = (-2.0, 2.0),
    steps: int = 7,
    transform: WhiteningTransform | None = None,
    anchor=None,
    image_shape: tuple[int, int] = (32, 32),
) -> np.ndarray:
    """Traversal figure: one row per dim, anchor image in the leftmost column.

    ``decode`` maps an (n, d) array of raw latent codes to (n, H*W) pixel
    probabilities. Without ``anchor`` the decode of ``z_base`` is used.
    """
    codes = traversal_codes(z_base, dims, value_range, steps, transform)
    rows = len(dims)
    h, w = image_shape
    decoded = np.asarray(decode(codes.reshape(-1, codes.shape[-1]))).reshape(rows, steps, h, w)
    if anchor is None:
        base = np.asarray(z_base, dtype=np.float64).reshape(1, -1)
        if transform is not None:
            base = unwhiten(base, transform)
        anchor = np.asarray(decode(base)).reshape(h, w)
    anchor = np.asarray(anchor, dtype=np.float64).reshape(h, w)
    tiles = np.concatenate([np.broadcast_to(anchor, (rows, 1, h, w)), decoded], axis=1)
    return tile_grid(tiles)


def reconstruction_panel(originals, reconstructions, image_shape=(32, 32)) -> np.ndarray:
    """Two-row panel: originals on top, reconstructions below."""
    h, w = image_shape
    top = np.asarray(originals, dtype=np.float64).reshape(-1, h, w)
    bottom = np.asarray(reconstructions, dtype=np.float64).reshape(-1, h, w)
    return tile_grid(np.stack([top, bottom]))
