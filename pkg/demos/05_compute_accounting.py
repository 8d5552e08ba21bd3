"""Analytic compute accounting: the MAC model prices full forwards, cached
refinement schedules, and expected cost at published operating points."""

from wavetok.flopsmodel import (
    GIGA,
    VIT_B16,
    block_macs_full,
    expected_cost,
    progressive_cost,
    solve_two_point_fraction,
)

# A 197-token base-scale tower (1 MAC counted as 1 FLOP).
total = block_macs_full(197, VIT_B16)
print(f"197-token full forward: {total / GIGA:.2f} G  (reference point ~16.87 G)")

# A two-step refinement schedule at the published 50/198 operating points.
report = progressive_cost([50, 198], 1, VIT_B16)
print("\ntwo-step schedule (cumulative tokens 50 -> 198):")
for s in report.steps:
    print(f"  step {s.step}: {s.n_new:3d} new tokens, cached {s.cached / GIGA:6.2f} G, "
          f"naive re-encode {s.naive / GIGA:6.2f} G, delta {s.delta / GIGA:+.2f} G")
print(f"  totals: cached {report.cached_total / GIGA:.2f} G vs "
      f"naive {report.naive_total / GIGA:.2f} G "
      f"({report.overhead:.1%} of the naive work avoided)")

# Expected cost at the published expected-token points.
print("\nexpected cost from expected tokens on the {50, 198} points:")
for tokens in (71.93, 89.0, 160.0):
    f = solve_two_point_fraction(tokens, 50, 198)
    ec = expected_cost([1 - f, f], [50, 198], VIT_B16)
    print(f"  E[tokens]={tokens:6.2f}  ->  full-depth fraction {f:.3f}, "
          f"E[cost] {ec.macs / GIGA:5.2f} G")

# A deeper schedule shows the cached advantage growing with depth.
report4 = progressive_cost([4, 14, 52, 200], 3, VIT_B16)
deltas = [s.delta / GIGA for s in report4.steps]
print(f"\nfour-step schedule deltas (naive minus cached, per step): "
      f"{[f'{d:+.2f}' for d in deltas]}")
