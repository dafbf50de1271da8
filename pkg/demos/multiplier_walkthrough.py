"""Build an 8-bit multiplier step by step and print what each stage produced."""

from mulgen.ct_assign import assign_stages
from mulgen.ct_plan import plan_area, plan_compressors
from mulgen.ct_wire import TreeLayout, greedy_wiring, sample_random_wirings
from mulgen.flow import FlowConfig, generate_multiplier
from mulgen.ppg import generate_and_array
from mulgen.verify import check_equivalence

N = 8

ppm = generate_and_array(N)
print("column heights:", ppm.heights)

plans = plan_compressors(ppm)
print("compressor area:", plan_area(plans))

a = assign_stages(plans)
print(f"stages: {a.stage_count} (optimal: {a.optimal})")

layout = TreeLayout(a, ppm)
dist = sample_random_wirings(layout, trials=2000, seed=0)
print(f"random wirings: min {dist.min:g} max {dist.max:g}; "
      f"greedy {greedy_wiring(layout).delay:g}")

for strategy in ("area", "timing", "tradeoff"):
    r = generate_multiplier(N, 0, FlowConfig(strategy=strategy))
    rep = check_equivalence(r.design.netlist, "exhaustive")
    print(f"{strategy:9s} area {r.report.area:7.1f} delay {r.report.delay:6.2f} "
          f"prefix nodes {r.design.graph.size:3d} verify {'pass' if rep.passed else 'FAIL'}")
