"""IDX (MNIST) file format: big-endian header, raw unsigned bytes."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IDXError(ValueError):
    pass


def _parse(data: bytes, magic: int, ndim: int) -> np.ndarray:
    if len(data) < 4:
        raise IDXError(f"file too short for a header ({len(data)} bytes)")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IDXError(f"bad magic 0x{found:08x}, expected 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IDXError(f"truncated header: expected {header} bytes, got {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    expected = int(np.prod(dims))
    actual = len(data) - header
    if actual < expected:
        raise IDXError(f"truncated payload: expected {expected} bytes, got {actual}")
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=header).reshape(dims)


def load_idx(image_bytes: bytes, label_bytes: bytes | None = None):
    """Parse IDX images (and optionally labels).

    Returns float64 images in [0, 1] of shape (N, rows, cols), or
    ``(images, labels)`` when label bytes are given.
    """
    raw = _parse(image_bytes, IMAGE_MAGIC, 3)
    images = raw.astype(np.float64) / 255.0
    if label_bytes is None:
        return images
    labels = _parse(label_bytes, LABEL_MAGIC, 1).astype(np.int64)
    if len(labels) != len(images):
        raise IDXError(f"{len(images)} images but {len(labels)} labels")
    return images, labels


def encode_images(images) -> bytes:
    """IDX bytes for (N, rows, cols) intensities in [0, 1]; byte = round(255 * value)."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise ValueError(f"expected (N, rows, cols), got shape {images.shape}")
    if images.size and (images.min() < 0 or images.max() > 1):
        raise ValueError("intensities must lie in [0, 1]")
    images = np.rint(images * 255.0).astype(np.uint8)
    return struct.pack(">4I", IMAGE_MAGIC, *images.shape) + images.tobytes()


def encode_labels(labels) -> bytes:
    labels = np.asarray(labels)
    if labels.ndim != 1 or (labels.size and (labels.min() < 0 or labels.max() > 255)):
        raise ValueError("labels must be a 1-d array of values in [0, 255]")
    return struct.pack(">2I", LABEL_MAGIC, len(labels)) + labels.astype(np.uint8).tobytes()


def write_idx(path, images) -> None:
    Path(path).write_bytes(encode_images(images))


def read_idx(path, label_path=None):
    labels = Path(label_path).read_bytes() if label_path is not None else None
    return load_idx(Path(path).read_bytes(), labels)
