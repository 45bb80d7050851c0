"""Binary checkpoint and whitening-transform files, plus curve/spectrum CSVs.

Checkpoint layout (little-endian)::

    b"LLAB" | u32 version | u32 n | n bytes of UTF-8 JSON architecture
    | u64 count | count float64 parameters | u32 CRC32 of the parameter bytes

Transform layout (little-endian)::

    b"LWHT" | u32 d | mean[d] | eigvals[d] | eigvecs[d*d] row-major
    | ceil(d/8) bytes of degenerate-dimension bitmask (bit i of byte i//8)
"""

from __future__ import annotations

import csv
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from wvae.nn import VAE
from wvae.whitening import WhiteningTransform

CHECKPOINT_MAGIC = b"LLAB"
CHECKPOINT_VERSION = 1
TRANSFORM_MAGIC = b"LWHT"


class FormatError(ValueError):
    pass


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class VersionError(FormatError):
    pass


def _need(buf: bytes, end: int, what: str) -> None:
    if len(buf) < end:
        raise TruncatedError(f"file truncated in {what}: need {end} bytes, have {len(buf)}")


def checkpoint_bytes(model: VAE) -> bytes:
    arch = json.dumps(model.architecture(), sort_keys=True).encode()
    payload = model.get_flat().astype("<f8").tobytes()
    return b"".join(
        [
            CHECKPOINT_MAGIC,
            struct.pack("<II", CHECKPOINT_VERSION, len(arch)),
            arch,
            struct.pack("<Q", len(payload) // 8),
            payload,
            struct.pack("<I", zlib.crc32(payload)),
        ]
    )


def model_from_bytes(buf: bytes) -> VAE:
    _need(buf, 12, "header")
    if buf[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"bad checkpoint magic {buf[:4]!r}")
    version, n_arch = struct.unpack_from("<II", buf, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    pos = 12
    _need(buf, pos + n_arch + 8, "architecture")
    arch = json.loads(buf[pos : pos + n_arch].decode())
    pos += n_arch
    (count,) = struct.unpack_from("<Q", buf, pos)
    pos += 8
    _need(buf, pos + 8 * count + 4, "parameters")
    payload = buf[pos : pos + 8 * count]
    (crc,) = struct.unpack_from("<I", buf, pos + 8 * count)
    if zlib.crc32(payload) != crc:
        raise ChecksumError("checkpoint payload CRC mismatch")

    model = VAE(
        arch["n_pixels"],
        arch["latent_dim"],
        arch["hidden"],
        activation=arch["activation"],
        objective=arch["objective"],
        rng=np.random.default_rng(0),
    )
    expected = sum(p.size for p in model.parameters())
    if count != expected:
        raise FormatError(f"architecture needs {expected} parameters, file has {count}")
    model.set_flat(np.frombuffer(payload, dtype="<f8"))
    return model


def save_checkpoint(path, model: VAE) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path) -> VAE:
    return model_from_bytes(Path(path).read_bytes())


def transform_bytes(T: WhiteningTransform) -> bytes:
    d = T.dim
    mask = np.packbits(T.degenerate.astype(np.uint8), bitorder="little")
    return b"".join(
        [
            TRANSFORM_MAGIC,
            struct.pack("<I", d),
            np.asarray(T.mean, dtype="<f8").tobytes(),
            np.asarray(T.eigvals, dtype="<f8").tobytes(),
            np.ascontiguousarray(T.eigvecs, dtype="<f8").tobytes(),
            mask.tobytes(),
        ]
    )


def transform_from_bytes(buf: bytes) -> WhiteningTransform:
    _need(buf, 8, "header")
    if buf[:4] != TRANSFORM_MAGIC:
        raise BadMagicError(f"bad transform magic {buf[:4]!r}")
    (d,) = struct.unpack_from("<I", buf, 4)
    nmask = (d + 7) // 8
    end = 8 + 8 * (2 * d + d * d) + nmask
    _need(buf, end, "payload")
    if len(buf) != end:
        raise FormatError(f"transform file has {len(buf) - end} trailing bytes for d={d}")
    floats = np.frombuffer(buf, dtype="<f8", count=2 * d + d * d, offset=8).astype(np.float64)
    mask = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, offset=end - nmask), bitorder="little")[:d]
    return WhiteningTransform(
        mean=floats[:d].copy(),
        eigvals=floats[d : 2 * d].copy(),
        eigvecs=floats[2 * d :].reshape(d, d).copy(),
        degenerate=mask.astype(bool),
    )


def save_transform(path, T: WhiteningTransform) -> None:
    Path(path).write_bytes(transform_bytes(T))


def load_transform(path) -> WhiteningTransform:
    return transform_from_bytes(Path(path).read_bytes())


# CSV: repr() of a Python float is the shortest string that round-trips.


def write_curves(curves, path) -> None:
    if not curves:
        raise ValueError("no curve entries to write")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "recon", "kl", "tc"])
        for c in curves:
            epoch, recon, kl, tc = (c.epoch, c.recon, c.kl, c.tc) if hasattr(c, "epoch") else c
            w.writerow([int(epoch), repr(float(recon)), repr(float(kl)), repr(float(tc))])


def read_curves(path) -> list[tuple[int, float, float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(int(r["epoch"]), float(r["recon"]), float(r["kl"]), float(r["tc"])) for r in rows]


def write_spectrum(eigvals, path) -> None:
    eigvals = list(eigvals)
    if not eigvals:
        raise ValueError("empty spectrum")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "eigenvalue"])
        for i, v in enumerate(eigvals):
            w.writerow([i + 1, repr(float(v))])


def read_spectrum(path) -> list[float]:
    with open(path, newline="") as fh:
        return [float(r["eigenvalue"]) for r in csv.DictReader(fh)]
