"""Rank-fidelity statistics between score tables and accuracy tables.

Everything downstream of the scorer treats NaN as "architecture excluded":
``join_tables`` drops and counts such rows, and every statistic here operates
on the surviving finite pairs only.  Correlations return ``None`` (missing)
rather than raising when they are undefined — zero variance, all ties,
too-small slices — so report files can render them as null.

Tie handling is deterministic: top-k selections order by (value desc,
arch_id asc); Spearman uses average ranks; Kendall is the tie-corrected
tau-b, computed by sort-and-count so large tables stay O(n log n) while
matching the quadratic definition bit-for-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def _check_pair(x, y, op: str):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"{op}: length mismatch {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError(f"{op}: need at least 2 observations, got {x.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError(f"{op}: non-finite entries (join first)")
    return x, y


def spearman(x, y) -> float | None:
    """Pearson correlation of average ranks; None when either side has zero
    rank variance (a constant vector carries no order information)."""
    x, y = _check_pair(x, y, "spearman")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = float(rx @ ry)
    # Perfectly monotone data must report exactly +/-1.0; the guard dodges
    # the 1-ulp wobble of sqrt(sxx*syy) when the product rounds.
    if sxx == syy and abs(sxy) == sxx:
        return math.copysign(1.0, sxy)
    return min(1.0, max(-1.0, sxy / math.sqrt(sxx * syy)))


def _count_inversions(a: np.ndarray) -> int:
    """Strict inversions (i<j with a[i] > a[j]) by divide and conquer."""
    n = a.size
    if n < 2:
        return 0
    mid = n // 2
    left, right = a[:mid], a[mid:]
    total = _count_inversions(left) + _count_inversions(right)
    sl, sr = np.sort(left), np.sort(right)
    total += int(np.searchsorted(sr, sl, side="left").sum())
    return total


def _tie_term(sorted_a: np.ndarray) -> int:
    """Sum over tie runs of t*(t-1)/2 for a pre-sorted array."""
    n = sorted_a.size
    boundaries = np.flatnonzero(np.diff(sorted_a) != 0)
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries + 1, [n]))
    runs = ends - starts
    return int((runs * (runs - 1) // 2).sum())


def kendall(x, y) -> float | None:
    """Tie-corrected tau-b, exactly equal to the O(n^2) pair count.

    Sort by (x, y); then discordant pairs are inversions of the y sequence,
    and the three tie terms come from run lengths.  All counts are exact
    integers, so the final ratio is bit-identical to the brute-force form
    (C - D)/sqrt((C+D+Tx)(C+D+Ty)).
    """
    x, y = _check_pair(x, y, "kendall")
    n = x.size
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1 = _tie_term(xs)                      # ties in x
    n2 = _tie_term(np.sort(y))              # ties in y
    n3 = _tie_term(xs + 1j * ys)            # ties in both (runs contiguous)
    dis = _count_inversions(ys)
    num = n0 - n1 - n2 + n3 - 2 * dis       # = C - D
    d1, d2 = n0 - n1, n0 - n2
    if d1 == 0 or d2 == 0:
        return None
    if d1 == d2 and abs(num) == d1:
        return math.copysign(1.0, num)
    return num / math.sqrt(d1 * d2)


def _top_indices(values: np.ndarray, ids: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values; ties resolved by ascending id."""
    order = np.lexsort((ids, -values))
    return order[:k]


@dataclass(frozen=True)
class JoinedSeries:
    """Finite (score, accuracy) pairs surviving the NaN-omitting join."""

    scores: np.ndarray
    accs: np.ndarray
    ids: np.ndarray          # arch ids, the deterministic tie-break key
    n_dropped: int

    def __len__(self) -> int:
        return int(self.scores.size)


def join_tables(scores, bench) -> JoinedSeries:
    """Inner join of a ScoreTable and a BenchTable on the genotype string.

    Matched rows with NaN/Inf on either side are dropped and counted;
    unmatched keys are simply absent (not counted as drops).  Duplicate
    genotypes in the score table are an error — the join would be ambiguous.
    """
    seen: dict[str, int] = {}
    dups = []
    for r in scores.rows:
        if r.genotype in seen:
            dups.append(r.genotype)
        seen[r.genotype] = r.arch_id
    if dups:
        raise ValueError(f"duplicate genotype keys in score table: "
                         f"{sorted(set(dups))}")
    out_s, out_a, out_i = [], [], []
    dropped = 0
    for r in scores.rows:
        row = bench.rows.get(r.genotype)
        if row is None:
            continue
        if math.isfinite(r.epsilon) and math.isfinite(row.val_acc):
            out_s.append(r.epsilon)
            out_a.append(row.val_acc)
            out_i.append(r.arch_id)
        else:
            dropped += 1
    return JoinedSeries(np.asarray(out_s, dtype=np.float64),
                        np.asarray(out_a, dtype=np.float64),
                        np.asarray(out_i, dtype=np.int64), dropped)


def top_fraction_overlap(scores, accs, frac: float,
                         ids=None) -> float | None:
    """Percentage of the top-ceil(frac*n) by accuracy recovered by the
    score's own top-ceil(frac*n)."""
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"frac must be in (0, 1], got {frac}")
    scores = np.asarray(scores, dtype=np.float64)
    accs = np.asarray(accs, dtype=np.float64)
    n = scores.size
    if n * frac < 1:
        return None
    ids = np.arange(n) if ids is None else np.asarray(ids)
    k = math.ceil(frac * n)
    by_score = set(_top_indices(scores, ids, k).tolist())
    by_acc = set(_top_indices(accs, ids, k).tolist())
    return 100.0 * len(by_score & by_acc) / k


def top_k_in_top_fraction(scores, accs, k: int, frac: float,
                          ids=None) -> int | None:
    """How many of the k best-scored rows sit in the top accuracy fraction."""
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"frac must be in (0, 1], got {frac}")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    scores = np.asarray(scores, dtype=np.float64)
    accs = np.asarray(accs, dtype=np.float64)
    n = scores.size
    if n < k:
        return None
    ids = np.arange(n) if ids is None else np.asarray(ids)
    top_scored = set(_top_indices(scores, ids, k).tolist())
    top_acc = set(_top_indices(accs, ids, math.ceil(frac * n)).tolist())
    return len(top_scored & top_acc)


def top_slice_correlations(scores, accs, frac: float,
                           ids=None) -> tuple[float | None, float | None]:
    """Spearman and Kendall restricted to the best accuracy fraction."""
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"frac must be in (0, 1], got {frac}")
    scores = np.asarray(scores, dtype=np.float64)
    accs = np.asarray(accs, dtype=np.float64)
    n = scores.size
    ids = np.arange(n) if ids is None else np.asarray(ids)
    k = math.ceil(frac * n) if n else 0
    if k < 2:
        return (None, None)
    sel = _top_indices(accs, ids, k)
    return spearman(scores[sel], accs[sel]), kendall(scores[sel], accs[sel])


@dataclass(frozen=True)
class RankReport:
    """The evaluation summary; None marks a statistic that was undefined."""

    spearman_global: float | None
    spearman_top: float | None
    kendall_global: float | None
    kendall_top: float | None
    top10_in_top10_pct: float | None
    top64_in_top5: int | None
    n_total: int
    n_valid: int
    n_dropped: int

    FIELDS = ("spearman_global", "spearman_top", "kendall_global",
              "kendall_top", "top10_in_top10_pct", "top64_in_top5",
              "n_total", "n_valid", "n_dropped")

    def to_json(self) -> str:
        doc = {name: getattr(self, name) for name in self.FIELDS}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RankReport":
        doc = json.loads(text)
        return cls(**{name: doc[name] for name in cls.FIELDS})


def compute_report(joined: JoinedSeries, top_frac: float = 0.1,
                   top_k: int = 64, top_k_frac: float = 0.05) -> RankReport:
    """All six fidelity statistics over one joined series.

    Statistics whose preconditions fail on this series (fewer than 2 valid
    rows, n < k, empty top fraction) come back as None, never as an error.
    """
    s, a, ids = joined.scores, joined.accs, joined.ids
    n_valid = len(joined)
    if n_valid >= 2:
        sp = spearman(s, a)
        kd = kendall(s, a)
        sp_top, kd_top = top_slice_correlations(s, a, top_frac, ids)
    else:
        sp = kd = sp_top = kd_top = None
    overlap = top_fraction_overlap(s, a, top_frac, ids) if n_valid else None
    topk = top_k_in_top_fraction(s, a, top_k, top_k_frac, ids) \
        if n_valid >= top_k else None
    return RankReport(
        spearman_global=sp, spearman_top=sp_top,
        kendall_global=kd, kendall_top=kd_top,
        top10_in_top10_pct=overlap, top64_in_top5=topk,
        n_total=n_valid + joined.n_dropped, n_valid=n_valid,
        n_dropped=joined.n_dropped)
