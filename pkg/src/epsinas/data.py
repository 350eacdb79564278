"""Batch acquisition: synthetic generators, a CIFAR-10 binary reader and the
neutral EPSB batch container.

Reproducibility contract: every random draw uses numpy's Philox (4x32-10)
counter-based generator seeded explicitly, so any implementation of the same
algorithm regenerates identical batches from the same seed.  Real images are
byte-scaled to [0, 1] and standardised per channel with the constants below,
which are part of the on-disk contract (the source never states its
preprocessing, so these are pinned here).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .engine import F32

BATCH_KINDS = ("real", "greyscale", "random_normal", "random_uniform",
               "random_uniform_pos")

DEFAULT_BATCH_SIZE = 256  # scores stop improving for larger batches

# Per-channel standardisation constants for real RGB batches.
CHANNEL_MEAN = (0.4914, 0.4822, 0.4465)
CHANNEL_STD = (0.2470, 0.2435, 0.2616)

_CIFAR_RECORD = 3073  # 1 label byte + 3 * 32 * 32 pixel bytes

EPSB_MAGIC = b"EPSB"


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide seeded generator (Philox counter-based)."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class BatchSpec:
    kind: str
    batch_size: int = DEFAULT_BATCH_SIZE
    shape: tuple[int, int, int] = (3, 32, 32)
    seed: int = 0
    source_path: str | None = None

    def __post_init__(self):
        if self.kind not in BATCH_KINDS:
            raise ValueError(f"unknown batch kind {self.kind!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        shape = tuple(int(d) for d in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"shape must be 3 positive dims, "
                             f"got {self.shape!r}")
        if self.kind == "real" and not self.source_path:
            raise ValueError("kind 'real' requires source_path")
        object.__setattr__(self, "shape", shape)


def make_batch(spec: BatchSpec) -> np.ndarray:
    """Materialise a [N, C, H, W] float32 batch per the spec.

    greyscale: image k is solid k/(N-1), a black-to-white ramp (N=1 gives a
    single black image).  random_normal ~ N(0, 1); random_uniform over
    [-1, 1); random_uniform_pos over [0, 1).  real: the first N records of a
    CIFAR-10-format file, standardised.
    """
    n = spec.batch_size
    full = (n,) + spec.shape
    if spec.kind == "greyscale":
        levels = np.zeros(n, dtype=F32) if n == 1 else \
            (np.arange(n, dtype=F32) / F32(n - 1))
        return np.broadcast_to(levels[:, None, None, None], full).copy()
    if spec.kind == "real":
        raw = load_cifar10_binary(spec.source_path, n)
        if raw.shape[1:] != spec.shape:
            raise ValueError(f"real batches are {raw.shape[1:]}, spec asks "
                             f"for {spec.shape}")
        mean = np.asarray(CHANNEL_MEAN, dtype=F32)[:, None, None]
        std = np.asarray(CHANNEL_STD, dtype=F32)[:, None, None]
        return (raw - mean) / std
    rng = make_rng(spec.seed)
    if spec.kind == "random_normal":
        return rng.standard_normal(full, dtype=F32)
    u = rng.random(full, dtype=F32)
    if spec.kind == "random_uniform":
        return u * F32(2.0) - F32(1.0)
    return u  # random_uniform_pos


def load_cifar10_binary(path, count: int, offset: int = 0) -> np.ndarray:
    """Read `count` records starting at `offset` from a CIFAR-10 binary file.

    Each 3073-byte record is one label byte then 3072 channel-major pixel
    bytes; labels are discarded (the score needs no labels) and pixels are
    scaled to [0, 1] float32.  Returns [count, 3, 32, 32].
    """
    if count < 1 or offset < 0:
        raise ValueError(f"need count >= 1 and offset >= 0, "
                         f"got {count}, {offset}")
    with open(path, "rb") as fh:
        fh.seek(0, 2)
        size = fh.tell()
        if size % _CIFAR_RECORD != 0:
            raise ValueError(f"{path}: size {size} is not a multiple of "
                             f"{_CIFAR_RECORD} bytes")
        total = size // _CIFAR_RECORD
        if offset + count > total:
            raise ValueError(f"{path}: requested records "
                             f"[{offset}, {offset + count}) of {total}")
        fh.seek(offset * _CIFAR_RECORD)
        buf = fh.read(count * _CIFAR_RECORD)
    rec = np.frombuffer(buf, dtype=np.uint8).reshape(count, _CIFAR_RECORD)
    pixels = rec[:, 1:].reshape(count, 3, 32, 32)
    return pixels.astype(F32) / F32(255.0)


def save_batch(path, t: np.ndarray) -> None:
    """Write a tensor as EPSB: magic, u32-LE rank, dims, f32-LE payload."""
    arr = np.ascontiguousarray(t, dtype=F32)
    with open(path, "wb") as fh:
        fh.write(EPSB_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f4", copy=False).tobytes())


def load_batch(path) -> np.ndarray:
    """Read an EPSB file back; errors on bad magic or truncated payload."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != EPSB_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}, expected "
                         f"{EPSB_MAGIC!r}")
    if len(blob) < 8:
        raise ValueError(f"{path}: truncated header")
    (rank,) = struct.unpack_from("<I", blob, 4)
    head = 8 + 4 * rank
    if rank < 1 or len(blob) < head:
        raise ValueError(f"{path}: invalid rank {rank} for file of "
                         f"{len(blob)} bytes")
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    expect = int(np.prod(dims)) * 4
    payload = blob[head:]
    if len(payload) != expect:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, dims "
                         f"{dims} need {expect}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
