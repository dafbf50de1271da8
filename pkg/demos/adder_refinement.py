"""Refine a prefix adder under a skewed arrival profile and compare to Sklansky."""

from mulgen.cpa import (bit_delays, build_initial_cpa, optimize_cpa, segment_regions,
                        sklansky)

prof = [0, 1, 2, 3, 4, 5, 5, 5, 5, 4, 4, 3, 3, 2, 1, 0]
w = len(prof)
g0 = build_initial_cpa(segment_regions(prof), w, prof)
sk = sklansky(w, prof)
print(f"initial: {g0.size} nodes, worst {max(bit_delays(g0)):g}")
print(f"sklansky: {sk.size} nodes, worst {max(bit_delays(sk)):g}")

tight = optimize_cpa(g0, [0.0] * w)
print(f"tight: {tight.graph.size} nodes, worst {max(tight.delays):g}, "
      f"{len(tight.steps)} moves")
for frac in (0.25, 0.5, 0.75):
    budget = max(tight.delays) + frac * (max(bit_delays(g0)) - max(tight.delays))
    r = optimize_cpa(g0, [budget] * w)
    print(f"budget {budget:6.2f}: {r.graph.size} nodes, unmet {r.unmet}")
