"""Walk the cell search space: enumeration, indexing and mutation.

Architectures are 6 operation choices on the edges of a 4-node cell,
giving 5^6 = 15,625 genotypes.  Enumeration order is fixed, so an
integer arch_id identifies an architecture everywhere (score tables,
benchmark tables, search trajectories).
"""

from epsinas import (
    EDGES,
    NUM_GENOTYPES,
    OPS,
    arch_index,
    enumerate_space,
    make_rng,
    mutate,
    parse_genotype,
)

# =========================================================================
# Enumeration and the id <-> genotype bijection.
# =========================================================================

space = enumerate_space()
print(f"operations per edge : {OPS}")
print(f"cell edges          : {EDGES}")
print(f"total genotypes     : {len(space)} (= {NUM_GENOTYPES})\n")

for i in (0, 1, 7776, NUM_GENOTYPES - 1):
    g = space[i]
    assert arch_index(g) == i
    print(f"arch {i:>5} : {g}")

text = "|nor_conv_1x1~0|+|none~0|skip_connect~1|+|none~0|none~1|none~2|"
print(f"\nround trip: parse_genotype gives arch "
      f"{arch_index(parse_genotype(text))}")

# =========================================================================
# A short mutation walk (single-edge edits, as used by evolution search).
# =========================================================================

rng = make_rng(7)
g = space[0]
print("\nmutation walk from the all-none cell:")
for step in range(5):
    g = mutate(g, rng)
    changed = sum(a != b for a, b in zip(g.edge_ops, space[0].edge_ops))
    print(f"  step {step + 1}: arch {arch_index(g):>5}  "
          f"(edges differing from start: {changed})  {g}")
