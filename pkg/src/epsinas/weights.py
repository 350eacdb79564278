"""Parameter initialisers: the constant shared-weight pair and the random
schemes used by the initialisation ablation.

All randomness flows through numpy's counter-based Philox generator so that
draws are reproducible and independent per parameter tensor: each tensor gets
its own stream derived from (seed, registry position), which makes results
insensitive to traversal order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import F32
from .space import Network, Parameter

SCHEME_KINDS = ("constant", "uniform", "normal", "kaiming_uniform",
                "kaiming_normal", "orthogonal")

# Embeddings initialised with one constant would collapse every input token
# to the same vector, so they get a small fixed-seed gaussian instead.
_EMBEDDING_SEED = 719476736
_EMBEDDING_STD = 0.1


@dataclass(frozen=True)
class WeightPair:
    """The two shared constants; canonicalised to ascending order.

    Score code relies on weight-order symmetry, so (2, 0.5) and (0.5, 2)
    are the same pair.  Equal values are allowed — they are the degenerate
    pair whose score is identically zero (or NaN).
    """

    w1: float
    w2: float

    def __post_init__(self):
        a, b = float(self.w1), float(self.w2)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"weights must be finite, got ({a!r}, {b!r})")
        if a > b:
            a, b = b, a
        object.__setattr__(self, "w1", a)
        object.__setattr__(self, "w2", b)

    def values(self) -> tuple[float, float]:
        return (self.w1, self.w2)


@dataclass(frozen=True)
class InitScheme:
    """A named random initialisation with its parameters and seed."""

    kind: str
    params: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown init scheme {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        if self.kind == "constant":
            if len(p) != 1 or not math.isfinite(p[0]):
                raise ValueError("constant scheme needs one finite value")
        elif self.kind == "uniform":
            if len(p) != 2 or not p[1] > p[0]:
                raise ValueError("uniform scheme needs (lo, hi) with hi > lo")
        elif self.kind == "normal":
            if len(p) != 2 or not p[1] > 0:
                raise ValueError("normal scheme needs (mean, std) with std > 0")
        elif p:
            raise ValueError(f"{self.kind} scheme takes no parameters")
        object.__setattr__(self, "params", p)


def _param_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def init_constant(net: Network, w: float) -> None:
    """Set every registry tensor to the shared constant w, elementwise.

    Covers conv/linear weights, BN gain/bias and linear bias alike; only
    embedding tensors are exempt (fixed-seed normal(0, 0.1) draw).
    """
    if not math.isfinite(w):
        raise ValueError(f"shared constant must be finite, got {w!r}")
    for i, p in enumerate(net.registry):
        if p.role == "embedding":
            rng = _param_rng(_EMBEDDING_SEED, i)
            p.array[...] = rng.normal(0.0, _EMBEDDING_STD,
                                      size=p.array.shape).astype(F32)
        else:
            p.array.fill(F32(w))


def _fan_in(p: Parameter) -> int:
    arr = p.array
    if arr.ndim < 2:
        raise ValueError(
            f"fan-in undefined for {p.name} with shape {arr.shape}")
    return int(np.prod(arr.shape[1:]))


def _draw(p: Parameter, scheme: InitScheme, rng: np.random.Generator):
    shape = p.array.shape
    kind = scheme.kind
    if kind == "constant":
        return np.full(shape, scheme.params[0], dtype=F32)
    if kind == "uniform":
        lo, hi = scheme.params
        return rng.uniform(lo, hi, size=shape).astype(F32)
    if kind == "normal":
        mean, std = scheme.params
        return rng.normal(mean, std, size=shape).astype(F32)
    if kind == "kaiming_uniform":
        bound = math.sqrt(2.0) * math.sqrt(3.0 / _fan_in(p))
        return rng.uniform(-bound, bound, size=shape).astype(F32)
    if kind == "kaiming_normal":
        std = math.sqrt(2.0 / _fan_in(p))
        return rng.normal(0.0, std, size=shape).astype(F32)
    # orthogonal: Q factor of a gaussian draw over the 2-D reshape, gain 1
    if p.array.ndim < 2:
        raise ValueError(
            f"orthogonal init needs >= 2 dims, {p.name} has shape {shape}")
    rows = shape[0]
    cols = int(np.prod(shape[1:]))
    flat = rng.normal(0.0, 1.0, size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))  # fix sign ambiguity for determinism
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q[:rows, :cols], dtype=F32).reshape(shape)


def init_random(net: Network, scheme: InitScheme) -> None:
    """Draw conv/linear weights per the scheme; deterministic given seed.

    Fan-in-free tensors keep conventional fixed values (gain 1, biases 0)
    because the named schemes are weight initialisers; embeddings draw from
    the scheme's own stream.
    """
    for i, p in enumerate(net.registry):
        rng = _param_rng(scheme.seed, i)
        if p.role == "bn-gain":
            p.array.fill(F32(1.0))
        elif p.role in ("bn-bias", "linear-bias"):
            p.array.fill(F32(0.0))
        elif p.role == "embedding" and scheme.kind == "constant":
            init_rng = _param_rng(_EMBEDDING_SEED, i)
            p.array[...] = init_rng.normal(
                0.0, _EMBEDDING_STD, size=p.array.shape).astype(F32)
        else:
            p.array[...] = _draw(p, scheme, rng)
