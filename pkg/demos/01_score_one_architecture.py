"""Score a single architecture with the two-initialisation dispersion
metric.

The score needs no training and no gradients: the network is evaluated
twice, once per constant shared weight, and the dispersion between the
min-max-normalised outputs becomes the score.  Extreme weights drive the
float32 forward pass to overflow or to a constant output; those cases
come back as NaN with a status instead of raising.
"""

from epsinas import (
    BatchSpec,
    SkeletonConfig,
    WeightPair,
    make_batch,
    parse_genotype,
    score_architecture,
)

# =========================================================================
# One genotype, one batch, several weight pairs.
# =========================================================================

genotype = parse_genotype(
    "|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+"
    "|avg_pool_3x3~0|none~1|nor_conv_3x3~2|")
cfg = SkeletonConfig()                      # 16-channel desk-scale skeleton
batch = make_batch(BatchSpec("greyscale", 256, (3, 32, 32)))

print(f"genotype: {genotype}")
print(f"skeleton: stem {cfg.stem_channels} channels, stacks "
      f"{cfg.stack_channels()}, input {cfg.input_shape}, batch 256\n")

for pair in (WeightPair(0.1, 1.0),          # a well-behaved pair
             WeightPair(1.0, 1.0),          # equal weights: zero dispersion
             WeightPair(1e30, 1e38)):       # overflow: NaN extinction
    result = score_architecture(genotype, cfg, batch, pair)
    print(f"weights ({pair.w1:>6g}, {pair.w2:>6g})  ->  "
          f"epsilon={result.epsilon!r:<24} status={result.status}")

print("""
Reading the rows:
 * the first pair produces a finite score usable for ranking,
 * equal weights agree with themselves, so the dispersion is exactly 0,
 * the huge pair overflows float32 and the row is flagged, not raised.
""")
