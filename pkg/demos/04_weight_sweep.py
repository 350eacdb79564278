"""Sweep the constant weight pair and watch scores live or die.

The metric needs two constant weights.  Moderate magnitudes give finite
scores; extreme magnitudes starve or overflow the float32 forward pass
and the score disappears into NaN (with a status explaining why).  This
is the ablation behind choosing a default pair.

Runtime: a few seconds (8 architectures x 5 weight pairs).
"""

from epsinas import (
    BatchSpec,
    SkeletonConfig,
    WeightPair,
    enumerate_space,
    make_batch,
    make_rng,
    score_architecture,
)

space = enumerate_space()
rng = make_rng(4)
sample = [space[int(i)] for i in rng.choice(len(space), 8, replace=False)]
cfg = SkeletonConfig()
batch = make_batch(BatchSpec("greyscale", 256, (3, 32, 32)))

pairs = [WeightPair(1e-12, 1e-10),     # tiny: outputs collapse
         WeightPair(1e-3, 1.0),
         WeightPair(0.1, 1.0),
         WeightPair(0.5, 2.0),
         WeightPair(1e30, 1e38)]       # huge: outputs overflow

# =========================================================================
# Score the grid.
# =========================================================================

print(f"{'pair':>20} | finite | NaN | statuses seen")
print("-" * 68)
for pair in pairs:
    results = [score_architecture(g, cfg, batch, pair) for g in sample]
    finite = sum(1 for r in results if r.valid)
    statuses = sorted({r.status for r in results})
    print(f"({pair.w1:>8g}, {pair.w2:>8g}) | {finite:>6} | "
          f"{len(results) - finite:>3} | {', '.join(statuses)}")

print("""
Moderate pairs keep every architecture alive; the extremes lose all of
them.  Scores are also symmetric in the pair order and exactly zero when
the two weights are equal (see the unit and acceptance suites).
""")
