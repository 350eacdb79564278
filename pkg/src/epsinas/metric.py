"""The dispersion score: output disagreement between two constant
shared-weight initialisations of the same untrained architecture.

For one architecture and one input batch, each shared constant w yields a raw
logit matrix [N, L].  Both matrices are flattened (sample-major, then class),
min-max normalised to [0, 1], and reduced to

    delta = mean_j |V'_1j - V'_2j|          (dispersion between the passes)
    mu    = mean over both normalised rows  (overall output level)
    score = delta / mu

Float32 range exhaustion is data, not an error: non-finite raw outputs or a
zero min-max range produce a NaN score with an explanatory status, and such
rows are omitted from downstream statistics.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .engine import F32, ShapeError, as_f32
from .space import (
    Genotype,
    SkeletonConfig,
    arch_index,
    build_network,
    constant_forward,
    format_genotype,
)
from .weights import InitScheme, WeightPair, init_random

STATUS_VALID = "valid"
STATUS_DEGENERATE = "degenerate_constant_output"
STATUS_NONFINITE = "nonfinite_output"
STATUSES = (STATUS_VALID, STATUS_DEGENERATE, STATUS_NONFINITE)


class DegenerateConstantOutput(ValueError):
    """Raised by minmax_normalize when max equals min (zero range)."""


class NonFiniteOutput(ValueError):
    """Raised by minmax_normalize when the vector contains NaN or Inf."""


@dataclass(frozen=True)
class EpsilonResult:
    epsilon: float
    delta: float
    mu: float
    status: str

    @property
    def valid(self) -> bool:
        return self.status == STATUS_VALID


def minmax_normalize(v: np.ndarray) -> np.ndarray:
    """Map v affinely onto [0, 1]: (v - min) / (max - min).

    Raises the degenerate signal on zero range and the non-finite signal if
    the input — or the normalised result, when the float32 range difference
    overflows — contains NaN/Inf.
    """
    v = as_f32(v).ravel()
    if v.size < 1:
        raise ShapeError("minmax_normalize: empty vector")
    if not np.isfinite(v).all():
        raise NonFiniteOutput("non-finite entries in output vector")
    lo, hi = v.min(), v.max()
    # Range overflow is expected data (it becomes a status), not a warning.
    with np.errstate(over="ignore", invalid="ignore"):
        rng = hi - lo
        if rng == 0:
            raise DegenerateConstantOutput(
                f"constant output vector (all entries {float(lo)!r})")
        out = (v - lo) / rng
    if not np.isfinite(out).all():
        raise NonFiniteOutput("normalisation overflowed float32 range")
    return out


def epsilon_from_outputs(m: np.ndarray) -> EpsilonResult:
    """Reduce a [2, L_v] matrix of already-normalised rows to the score.

    Sums are accumulated in float64; with min-max normalised rows mu is at
    least 1/L_v whenever the rows are non-degenerate, so the ratio is finite.
    """
    m = as_f32(m)
    if m.ndim != 2 or m.shape[0] != 2 or m.shape[1] < 1:
        raise ShapeError(
            f"epsilon_from_outputs: expected [2, L_v] matrix, got {m.shape}")
    if not np.isfinite(m).all():
        return EpsilonResult(math.nan, math.nan, math.nan, STATUS_NONFINITE)
    lv = m.shape[1]
    delta = float(np.abs(m[0] - m[1]).sum(dtype=np.float64) / lv)
    mu = float(m.sum(dtype=np.float64) / (2 * lv))
    if mu == 0.0:
        return EpsilonResult(math.nan, delta, mu, STATUS_DEGENERATE)
    return EpsilonResult(delta / mu, delta, mu, STATUS_VALID)


def normalized_output(v: np.ndarray) -> tuple[np.ndarray | None, str]:
    """Flatten and min-max normalise one raw output, mapping the failure
    signals to a status instead of raising.  Lets callers cache per-pass
    normalised vectors and combine them pairwise later."""
    try:
        return minmax_normalize(as_f32(v).ravel()), STATUS_VALID
    except NonFiniteOutput:
        return None, STATUS_NONFINITE
    except DegenerateConstantOutput:
        return None, STATUS_DEGENERATE


def epsilon_from_normalized(n1, s1: str, n2, s2: str) -> EpsilonResult:
    """Combine two normalized_output results; first bad row sets the status."""
    if s1 != STATUS_VALID:
        return EpsilonResult(math.nan, math.nan, math.nan, s1)
    if s2 != STATUS_VALID:
        return EpsilonResult(math.nan, math.nan, math.nan, s2)
    if n1.size != n2.size:
        raise ShapeError(f"output lengths differ: {n1.size} vs {n2.size}")
    return epsilon_from_outputs(np.stack([n1, n2]))


def epsilon_from_raw(v1: np.ndarray, v2: np.ndarray) -> EpsilonResult:
    """Flatten, normalise and score two raw output matrices/vectors."""
    r1, r2 = as_f32(v1).ravel(), as_f32(v2).ravel()
    if r1.size != r2.size or r1.size < 1:
        raise ShapeError(
            f"epsilon_from_raw: output lengths {r1.size} vs {r2.size}")
    n1, s1 = normalized_output(r1)
    n2, s2 = normalized_output(r2)
    return epsilon_from_normalized(n1, s1, n2, s2)


def _check_batch(batch: np.ndarray, cfg: SkeletonConfig) -> np.ndarray:
    x = as_f32(batch)
    if x.ndim != 4 or x.shape[1:] != cfg.input_shape or x.shape[0] < 1:
        raise ShapeError(
            f"batch shape {x.shape} incompatible with input shape "
            f"[N, {', '.join(str(d) for d in cfg.input_shape)}], N >= 1")
    return x


def score_architecture(g: Genotype, cfg: SkeletonConfig, batch: np.ndarray,
                       weights: WeightPair) -> EpsilonResult:
    """Score one architecture: two constant-init forwards, then the ratio.

    Constant shared weights admit the channel-collapsed evaluation (see
    ``constant_forward``), so no weight arrays are materialised; one
    evaluation per distinct value, and with equal weights a single forward
    serves both rows, making the score exactly 0 unless degenerate.  Shape
    problems raise; float extinction returns a NaN result with status
    instead.
    """
    x = _check_batch(batch, cfg)
    outs = []
    for w in dict.fromkeys(weights.values()):
        outs.append(constant_forward(g, cfg, x, w).ravel())
    if len(outs) == 1:
        outs.append(outs[0])
    return epsilon_from_raw(outs[0], outs[1])


def score_architecture_random(g: Genotype, cfg: SkeletonConfig,
                              batch: np.ndarray, scheme: InitScheme,
                              seed_a: int, seed_b: int) -> EpsilonResult:
    """Ablation-mode score: the two passes use two seeds of one random
    initialisation scheme in place of the two shared constants."""
    x = _check_batch(batch, cfg)
    outs = []
    for seed in (seed_a, seed_b):
        net = build_network(g, cfg)
        init_random(net, replace(scheme, seed=int(seed)))
        outs.append(net.forward(x).ravel())
    return epsilon_from_raw(outs[0], outs[1])


@dataclass(frozen=True)
class ScoreRow:
    arch_id: int
    genotype: str
    epsilon: float
    status: str


@dataclass
class ScoreTable:
    """Scores in input order; arch_id is the genotype's position in the
    full-space enumeration, independent of scoring order."""

    rows: list[ScoreRow]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def nan_count(self) -> int:
        return sum(1 for r in self.rows if not math.isfinite(r.epsilon))


def score_space(gs, cfg: SkeletonConfig, batch: np.ndarray,
                weights: WeightPair, parallelism: int = 1) -> ScoreTable:
    """Score a genotype list; output order equals input order regardless of
    the worker count, so tables are reproducible artifacts."""
    if parallelism < 1:
        raise ValueError(f"parallelism must be positive, got {parallelism}")
    gs = list(gs)
    x = _check_batch(batch, cfg)

    def one(g: Genotype) -> ScoreRow:
        r = score_architecture(g, cfg, x, weights)
        return ScoreRow(arch_index(g), format_genotype(g), r.epsilon, r.status)

    if parallelism == 1 or len(gs) <= 1:
        rows = [one(g) for g in gs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(one, gs))
    return ScoreTable(rows)


SCORE_HEADER = ["arch_id", "genotype", "epsilon", "status"]


def write_scores_csv(table: ScoreTable, path) -> None:
    """CSV with header arch_id,genotype,epsilon,status; NaN as empty field."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCORE_HEADER)
        for r in table.rows:
            eps = repr(float(r.epsilon)) if math.isfinite(r.epsilon) else ""
            w.writerow([r.arch_id, r.genotype, eps, r.status])


def read_scores_csv(path) -> ScoreTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCORE_HEADER:
            raise ValueError(f"bad score CSV header {header!r}, "
                             f"expected {SCORE_HEADER}")
        rows = []
        for ln, rec in enumerate(reader, start=2):
            if len(rec) != 4:
                raise ValueError(f"line {ln}: expected 4 fields, got {rec!r}")
            arch_id, genotype, eps, status = rec
            if status not in STATUSES:
                raise ValueError(f"line {ln}: unknown status {status!r}")
            rows.append(ScoreRow(int(arch_id), genotype,
                                 float(eps) if eps else math.nan, status))
    return ScoreTable(rows)
