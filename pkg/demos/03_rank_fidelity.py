"""Measure how well the proxy score ranks architectures.

A scored sample is joined against a benchmark accuracy table and
summarised with rank statistics: Spearman/Kendall correlations globally
and inside the top accuracy slice, plus top-overlap measures.  Here the
benchmark is synthetic - accuracy follows the score's rank with some
noise - so the numbers are high but not perfect, which is what real
benchmark joins look like.

Runtime: roughly ten seconds (150 architectures are actually scored).
"""

from epsinas import (
    BatchSpec,
    BenchRow,
    BenchTable,
    SkeletonConfig,
    WeightPair,
    compute_report,
    enumerate_space,
    join_tables,
    make_batch,
    make_rng,
    score_space,
)

# =========================================================================
# Score a sample of the space.
# =========================================================================

space = enumerate_space()
rng = make_rng(99)
sample = [space[int(i)] for i in rng.choice(len(space), 150, replace=False)]
batch = make_batch(BatchSpec("greyscale", 256, (3, 32, 32)))

print("scoring 150 sampled architectures...")
table = score_space(sample, SkeletonConfig(), batch, WeightPair(0.1, 1.0),
                    parallelism=1)
print(f"scored {len(table)} rows, {table.nan_count} NaN\n")

# =========================================================================
# Synthetic benchmark: accuracy = noisy increasing function of the score.
# =========================================================================

finite = [r for r in table.rows if r.epsilon == r.epsilon]
ranked = sorted(finite, key=lambda r: r.epsilon)
bench_rows = {}
for rank, row in enumerate(ranked):
    val = 60.0 + 30.0 * rank / len(ranked) + float(rng.normal(0.0, 1.5))
    bench_rows[row.genotype] = BenchRow(row.arch_id, min(val, 100.0),
                                        min(val, 100.0) - 2.0,
                                        1000 + row.arch_id)
bench = BenchTable(bench_rows, {"dataset": "synthetic-noisy-monotone"})

# =========================================================================
# Join and report.
# =========================================================================

joined = join_tables(table, bench)
report = compute_report(joined, top_frac=0.1, top_k=20, top_k_frac=0.2)
print(f"joined rows: {len(joined)} (dropped {joined.n_dropped} NaN)")
print(f"global Spearman rho : {report.spearman_global:.3f}")
print(f"global Kendall tau  : {report.kendall_global:.3f}")
print(f"top-10% slice rho   : {report.spearman_top}")
print(f"top-10% overlap     : {report.top10_in_top10_pct:.0f}%")
print(f"top-20 in top-20%   : {report.top64_in_top5}")
print("\nJSON form (what the correlate artifact contains):")
print(report.to_json())
