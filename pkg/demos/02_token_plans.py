"""Token plans: how subbands become ordered coarse-to-fine token groups, and
the two published count conventions."""

from wavetok import build_token_plan, table1_counts, token_counts

# The classic 224x224 / patch-16 grid has 196 spatial tokens. The published
# count table uses floor arithmetic so it covers levels that do not divide
# the grid evenly; one readout marker joins per refinement column.
print("count table for N=196 (published convention):")
for levels in (1, 2, 3, 4):
    row = [table1_counts(196, levels, col) for col in range(1, levels + 1)]
    print(f"  L={levels}: {row}")

# Strictly divisible configs use the exact convention: spatial tokens shrink
# by 4 per level and each step carries s+1 readouts.
print("\nexact counts for a 256x256 / patch-16 / L=2 config:")
for s in (0, 1, 2):
    print(f"  after {s} refinements: {token_counts(256, 256, 16, 2, s)} tokens")

plan = build_token_plan(64, 64, 8, 2)
print("\nplan for 64x64 / patch-8 / L=2:")
for g in plan.groups:
    kinds = sorted({t.kind for t in g.tokens if t.kind != "READOUT"})
    level = next(t.level for t in g.tokens)
    print(f"  group {g.group_id}: {g.spatial_size} spatial tokens from "
          f"level-{level} {kinds} + 1 readout")
print(f"  cumulative counts: {plan.cumulative_counts}")
print(f"  spatial partition: {sum(g.spatial_size for g in plan.groups)} "
      f"== (64/8)^2 == {(64 // 8) ** 2}")
