"""End-to-end generation pipelines shared by the command line and tests."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .cpa import (FdcModel, OptimizeResult, PrefixGraph, bit_delays, build_initial_cpa,
                  extract_subtree, fdc_features, fit_depth_only, fit_fdc, optimize_cpa, rca,
                  segment_regions, sklansky)
from .ct_assign import assign_stages
from .ct_plan import plan_compressors
from .ct_wire import DelayTable, TreeLayout, evaluate_wiring, wire_tree
from .netlist import (Design, GateLibrary, NetlistReport, arrival_times, elaborate_adder,
                      elaborate_multiplier, report)
from .ppg import generate_and_array, inject_accumulator

log = logging.getLogger(__name__)

STRATEGIES = ("area", "timing", "tradeoff")
ILP_AUTO_WIDTH = 16  # stage assignment
ILP_AUTO_BINARIES = 700  # wiring: permutation binaries


@dataclass
class FlowConfig:
    strategy: str = "tradeoff"
    target_delay: float | None = None
    assign: str = "auto"  # ilp, greedy, auto
    wiring: str = "auto"  # ilp, greedy, identity, auto
    backend: str = "internal"
    solver_path: str | None = None
    time_limit: float = 3600.0
    seed: int = 0
    eps: float = 1.5
    stage_max: int | None = None
    delays: DelayTable = field(default_factory=DelayTable)
    fdc: FdcModel = field(default_factory=FdcModel)
    library: GateLibrary = field(default_factory=GateLibrary)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; use one of {STRATEGIES}")
        if self.assign not in ("ilp", "greedy", "auto"):
            raise ValueError(f"unknown assignment method {self.assign!r}")
        if self.wiring not in ("ilp", "greedy", "identity", "auto"):
            raise ValueError(f"unknown wiring method {self.wiring!r}")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")


@dataclass
class FlowResult:
    design: Design
    report: NetlistReport
    ct_delay: float
    cpa: OptimizeResult | None
    notes: list[str] = field(default_factory=list)

    @property
    def solver_limited(self) -> bool:
        return any("not proven" in n or "no incumbent" in n for n in self.notes)

    def summary(self) -> dict:
        d = self.design
        out = {
            "kind": d.kind,
            "width": d.width,
            "acc_width": d.acc_width,
            "area": self.report.area,
            "delay": self.report.delay,
            "gate_counts": self.report.gate_counts,
            "profile": self.report.profile,
            "cpa": {"offset": d.cpa_offset, "width": d.graph.width,
                    "prefix_nodes": d.graph.size, "depth": d.graph.depth() if d.graph.width else 0,
                    "unmet_bits": self.cpa.unmet if self.cpa else []},
            "notes": self.notes,
        }
        if d.assignment is not None:
            out["ct"] = {"stages": d.assignment.stage_count,
                         "full_adders": sum(map(sum, d.assignment.f)),
                         "half_adders": sum(map(sum, d.assignment.h)),
                         "assignment": d.assignment.method,
                         "wiring": d.wiring.method if d.wiring else None,
                         "delay": self.ct_delay}
        return out


def wiring_binaries(layout: TreeLayout) -> int:
    """Permutation binaries the wiring model needs (free slices only)."""
    a = layout.assignment
    return sum(layout.size(i, j) ** 2 for i, j, f, h, _ in a.slices()
               if f + h and layout.size(i, j) > 1)


def plan_cpa(n: int, arrivals: Sequence[float], cfg: FlowConfig) -> tuple[PrefixGraph, OptimizeResult | None]:
    """Initial region-segmented structure refined for the chosen strategy."""
    if n == 0:
        return PrefixGraph(1), None
    regions = segment_regions(arrivals, cfg.eps)
    g0 = build_initial_cpa(regions, n, arrivals)
    if cfg.target_delay is not None:
        res = optimize_cpa(g0, [cfg.target_delay] * n, cfg.fdc)
        return res.graph, res
    if cfg.strategy == "area":
        g0.prune()
        return g0, None
    fast = optimize_cpa(g0, [0.0] * n, cfg.fdc)
    if cfg.strategy == "timing":
        return fast.graph, fast
    budget = 0.5 * (max(bit_delays(g0, cfg.fdc)) + max(fast.delays))
    res = optimize_cpa(g0, [budget] * n, cfg.fdc)
    return res.graph, res


def generate_multiplier(width: int, acc_width: int = 0, cfg: FlowConfig | None = None,
                        name: str | None = None) -> FlowResult:
    """PPG, compressor plan, stage assignment, wiring, prefix adder, gates."""
    cfg = cfg or FlowConfig()
    ppm = generate_and_array(width)
    if acc_width:
        ppm = inject_accumulator(ppm, acc_width)
    notes: list[str] = []
    plans = plan_compressors(ppm)
    assign = cfg.assign
    if assign == "auto":
        assign = "ilp" if width <= ILP_AUTO_WIDTH else "greedy"
    a = assign_stages(plans, assign, stage_max=cfg.stage_max, time_limit=cfg.time_limit,
                      backend=cfg.backend, solver_path=cfg.solver_path)
    notes += a.notes
    layout = TreeLayout(a, ppm)
    and_delay = cfg.library.delay["AND"]

    def arrive(bit_name: str) -> float:
        return and_delay if bit_name.startswith("pp_") else 0.0

    wmethod = cfg.wiring
    if wmethod == "auto":
        wmethod = "ilp" if wiring_binaries(layout) <= ILP_AUTO_BINARIES else "greedy"
    wiring = wire_tree(layout, wmethod, cfg.delays, input_arrivals=arrive,
                       time_limit=cfg.time_limit, backend=cfg.backend,
                       solver_path=cfg.solver_path)
    notes += wiring.notes
    timing = evaluate_wiring(layout, wiring, cfg.delays, arrive)
    profile = timing.column_profile()
    holder: dict = {}

    def graph_for(off: int, n: int) -> PrefixGraph:
        g, res = plan_cpa(n, profile[off:off + n], cfg)
        holder["res"] = res
        return g

    design = elaborate_multiplier(ppm, a, wiring, graph_for, name)
    res = holder.get("res")
    if res is not None and res.unmet and (cfg.strategy != "timing" or cfg.target_delay):
        notes.append(f"prefix adder misses its budget on bits {res.unmet}")
    rep = report(design.netlist, cfg.library)
    return FlowResult(design, rep, timing.delay, res, notes)


def generate_adder(width: int, cfg: FlowConfig | None = None,
                   arrivals: Sequence[float] | None = None, name: str | None = None) -> FlowResult:
    cfg = cfg or FlowConfig()
    arrivals = [0.0] * width if arrivals is None else list(arrivals)
    g, res = plan_cpa(width, arrivals, cfg)
    nl = elaborate_adder(g, name)
    notes = []
    if res is not None and res.unmet and (cfg.strategy != "timing" or cfg.target_delay):
        notes.append(f"prefix adder misses its budget on bits {res.unmet}")
    design = Design("add", width, 0, None, None, None, g, 0, nl)
    return FlowResult(design, report(nl, cfg.library), 0.0, res, notes)


# -- sweep ----------------------------------------------------------------------

def pareto_front(points: Sequence[tuple[float, float]]) -> list[bool]:
    """True for points no other point beats in both area and delay."""
    out = []
    for k, (a, d) in enumerate(points):
        dominated = any((a2 <= a and d2 <= d) and (a2 < a or d2 < d)
                        for m, (a2, d2) in enumerate(points) if m != k)
        out.append(not dominated)
    return out


def sweep_point(args) -> dict:
    kind, width, acc, strategy, cfg = args
    cfg = replace(cfg, strategy=strategy)
    r = generate_adder(width, cfg) if kind == "add" else generate_multiplier(width, acc, cfg)
    return {"kind": kind, "width": width, "acc_width": acc, "strategy": strategy,
            "area": r.report.area, "delay": r.report.delay,
            "prefix_nodes": r.design.graph.size, "gates": len(r.design.netlist.gates)}


# -- timing-model fitting corpus ---------------------------------------------------

@dataclass
class FitResult:
    fdc: FdcModel
    depth_only: tuple[float, float, float, float]  # k, b, R², MAPE
    adders: int
    samples: int


def _trapezoid(n: int, rng: random.Random) -> list[float]:
    top = rng.uniform(2.0, 10.0)
    rise = max(1, int(n * rng.uniform(0.2, 0.45)))
    fall = max(1, int(n * rng.uniform(0.1, 0.4)))
    prof = []
    for i in range(n):
        t = top * min(1.0, (i + 1) / rise, (n - i) / fall)
        prof.append(round(t * 2) / 2)
    return prof


def adder_corpus(count: int = 60, seed: int = 0, widths: Sequence[int] = (8, 12, 16, 24, 32),
                 model: FdcModel | None = None) -> list[PrefixGraph]:
    """Varied prefix adders: ripple, Sklansky, region-segmented starts and
    their refinements under random budgets."""
    rng = random.Random(seed)
    model = model or FdcModel()
    out = []
    while len(out) < count:
        n = rng.choice(list(widths))
        pick = len(out) % 4
        if pick == 0:
            out.append(rca(n) if rng.random() < 0.3 else sklansky(n))
            continue
        prof = _trapezoid(n, rng)
        g0 = build_initial_cpa(segment_regions(prof), n, prof)
        if pick == 1:
            out.append(g0)
            continue
        base = bit_delays(g0, model)
        slack = rng.uniform(0.0, 1.0)
        res = optimize_cpa(g0, [b * slack for b in base], model)
        out.append(res.graph)
    for g in out:
        g.arrivals = [0.0] * g.width
    return out


def fit_timing(count: int = 60, seed: int = 0, effort: float = 0.5,
               library: GateLibrary | None = None) -> FitResult:
    """Fit the FDC and depth-only models against gate-level path delays.

    Ground truth for bit ``i`` is the arrival of the adder's sum bit
    ``i + 1`` (carry-out for the top bit) with all inputs at time 0 and a
    fanout-dependent gate delay (``effort`` per fanout).
    """
    lib = library or GateLibrary()
    lib = GateLibrary(dict(lib.delay), dict(lib.area), effort)
    fdc_samples, depth_samples = [], []
    graphs = adder_corpus(count, seed)
    for g in graphs:
        nl = elaborate_adder(g)
        at = arrival_times(nl, lib)
        outs = nl.outputs["s"]
        lv = g.levels()
        for bit in range(1, g.width):
            truth = at[outs[bit + 1]]
            fdc_samples.append((fdc_features(extract_subtree(g, bit)), truth))
            depth_samples.append((lv[g.outputs[bit]], truth))
    fdc = fit_fdc(fdc_samples)
    return FitResult(fdc, fit_depth_only(depth_samples), len(graphs), len(fdc_samples))

