"""Interconnect order inside the compressor tree.

Every slice ``(i, j)`` has an ordered vector of *sources* (bits entering
the slice) and an equally long vector of *sinks* (compressor ports plus
dummy passthrough ports).  A wiring is one permutation per slice,
``perm[v] = u`` meaning source ``u`` drives sink ``v``.

Source order: 3:2 sums, then 2:2 sums, then passthroughs (all from the
slice below in the same column), then 3:2 carries and 2:2 carries from
the slice below in column ``j-1``.  Stage-0 sources follow the matrix
column order.  Sink order: ports A, B, C of each 3:2, ports A, B of each
2:2, then passthrough ports.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import ilp
from .ct_assign import StageAssignment
from .ppg import PartialProductMatrix

log = logging.getLogger(__name__)


class WiringError(RuntimeError):
    pass


@dataclass(frozen=True)
class DelayTable:
    """Port-to-output delays of the two compressor cells (time units)."""

    t_as: float = 3.0
    t_bs: float = 3.0
    t_cs: float = 1.5
    t_ac: float = 2.5
    t_bc: float = 2.5
    t_cc: float = 2.0
    t_s: float = 1.5
    t_c: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"delay {k} must be finite and non-negative, got {v}")

    @classmethod
    def from_dict(cls, d: Mapping[str, float]) -> "DelayTable":
        known = set(cls.__dataclass_fields__)
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown delay keys: {sorted(bad)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def fa_sum(self) -> tuple[float, float, float]:
        return self.t_as, self.t_bs, self.t_cs

    @property
    def fa_carry(self) -> tuple[float, float, float]:
        return self.t_ac, self.t_bc, self.t_cc


# -- tree layout ---------------------------------------------------------------

@dataclass(frozen=True)
class Source:
    kind: str  # "in", "fa_s", "ha_s", "pass", "fa_c", "ha_c"
    stage: int  # stage of the slice that produced it (-1 for inputs)
    column: int  # column of the producing slice
    index: int  # compressor or passthrough index within the producer
    name: str = ""  # input bit name for kind "in"


@dataclass(frozen=True)
class Sink:
    kind: str  # "fa", "ha", "pass"
    index: int
    port: str  # "a", "b", "c" or "" for passthroughs


def slice_sinks(f: int, h: int, pp: int) -> list[Sink]:
    sinks = [Sink("fa", k, p) for k in range(f) for p in "abc"]
    sinks += [Sink("ha", k, p) for k in range(h) for p in "ab"]
    sinks += [Sink("pass", k, "") for k in range(pp - 3 * f - 2 * h)]
    return sinks


class TreeLayout:
    """Source and sink vectors of every slice of an assignment.

    Stage ``stage_count`` holds the tree outputs (sources only).
    """

    def __init__(self, assignment: StageAssignment,
                 ppm: PartialProductMatrix | None = None):
        self.assignment = a = assignment
        self.S = a.stage_count
        self.J = a.n_columns
        self.sources: dict[tuple[int, int], list[Source]] = {}
        self.sinks: dict[tuple[int, int], list[Sink]] = {}
        for j in range(self.J):
            if ppm is not None and j < ppm.n_columns:
                names = [b.name for b in ppm.columns[j]]
            else:
                names = [f"in_{j}_{k}" for k in range(a.pp[0][j])]
            if len(names) != a.pp[0][j]:
                raise WiringError(f"column {j}: matrix has {len(names)} bits, "
                                  f"assignment expects {a.pp[0][j]}")
            self.sources[(0, j)] = [Source("in", -1, j, k, n) for k, n in enumerate(names)]
        for i in range(self.S):
            for j in range(self.J):
                f, h, pp = a.f[i][j], a.h[i][j], a.pp[i][j]
                self.sinks[(i, j)] = slice_sinks(f, h, pp)
                if len(self.sinks[(i, j)]) != len(self.sources[(i, j)]):
                    raise WiringError(f"slice ({i},{j}): {len(self.sources[(i, j)])} "
                                      f"sources vs {len(self.sinks[(i, j)])} sinks")
            for j in range(self.J):
                f, h, pp = a.f[i][j], a.h[i][j], a.pp[i][j]
                nxt = [Source("fa_s", i, j, k) for k in range(f)]
                nxt += [Source("ha_s", i, j, k) for k in range(h)]
                nxt += [Source("pass", i, j, k) for k in range(pp - 3 * f - 2 * h)]
                if j:
                    nxt += [Source("fa_c", i, j - 1, k) for k in range(a.f[i][j - 1])]
                    nxt += [Source("ha_c", i, j - 1, k) for k in range(a.h[i][j - 1])]
                if len(nxt) != a.pp[i + 1][j]:
                    raise WiringError(f"slice ({i + 1},{j}): source count mismatch")
                self.sources[(i + 1, j)] = nxt

    def slice_keys(self):
        return [(i, j) for i in range(self.S) for j in range(self.J)]

    def size(self, i: int, j: int) -> int:
        return len(self.sources[(i, j)])

    def outputs(self) -> list[list[Source]]:
        return [self.sources[(self.S, j)] for j in range(self.J)]


# -- wiring plans --------------------------------------------------------------

@dataclass
class WiringPlan:
    perms: dict[tuple[int, int], tuple[int, ...]]
    delay: float | None = None
    method: str = "identity"
    optimal: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "optimal": self.optimal,
            "delay": self.delay,
            "notes": self.notes,
            "slices": [{"stage": i, "column": j, "perm": list(p)}
                       for (i, j), p in sorted(self.perms.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WiringPlan":
        perms = {(s["stage"], s["column"]): tuple(s["perm"]) for s in d["slices"]}
        return cls(perms, d.get("delay"), d.get("method", "ilp"), d.get("optimal", False),
                   list(d.get("notes", [])))


def identity_wiring(layout: TreeLayout) -> WiringPlan:
    return WiringPlan({k: tuple(range(layout.size(*k))) for k in layout.slice_keys()})


def check_wiring(layout: TreeLayout, wiring: WiringPlan) -> None:
    for key in layout.slice_keys():
        p = wiring.perms.get(key)
        m = layout.size(*key)
        if p is None:
            raise WiringError(f"slice {key} has no permutation")
        if sorted(p) != list(range(m)):
            raise WiringError(f"slice {key}: {p} is not a permutation of {m} sources")


def _input_times(layout: TreeLayout, input_arrivals) -> dict[tuple[int, int], np.ndarray]:
    out = {}
    for j in range(layout.J):
        srcs = layout.sources[(0, j)]
        if input_arrivals is None:
            t = np.zeros(len(srcs))
        elif callable(input_arrivals):
            t = np.array([float(input_arrivals(s.name)) for s in srcs])
        else:
            t = np.array([float(input_arrivals.get(s.name, 0.0)) for s in srcs])
        out[(0, j)] = t
    return out


@dataclass
class WiringTiming:
    """Forward-propagated arrival times."""

    sources: dict[tuple[int, int], np.ndarray]
    outputs: list[list[float]]  # per column, the arrival of each output bit
    delay: float

    def column_profile(self) -> list[float]:
        return [max(c) if c else 0.0 for c in self.outputs]


def _slice_outputs(f, h, sink_t, d: DelayTable):
    """Sum, carry and passthrough times from sink times (last axis = ports)."""
    fa = sink_t[..., :3 * f].reshape(sink_t.shape[:-1] + (f, 3))
    s_fa = np.max(fa + np.array(d.fa_sum), axis=-1)
    c_fa = np.max(fa + np.array(d.fa_carry), axis=-1)
    ha = sink_t[..., 3 * f:3 * f + 2 * h].reshape(sink_t.shape[:-1] + (h, 2))
    ha_max = np.max(ha, axis=-1, initial=-np.inf) if h else ha[..., 0]
    s_ha = ha_max + d.t_s
    c_ha = ha_max + d.t_c
    passthrough = sink_t[..., 3 * f + 2 * h:]
    return s_fa, s_ha, passthrough, c_fa, c_ha


def _propagate(layout: TreeLayout, perms_of, delays: DelayTable, base):
    """Shared forward pass; ``perms_of(key)`` returns index arrays on the last
    axis (shape ``(m,)`` or ``(T, m)``)."""
    a = layout.assignment
    times = dict(base)
    for i in range(layout.S):
        carries = {}
        sums = {}
        for j in range(layout.J):
            src = times[(i, j)]
            p = perms_of((i, j))
            sink_t = np.take_along_axis(src, p, axis=-1) if p.ndim == src.ndim else src[..., p]
            s_fa, s_ha, pt, c_fa, c_ha = _slice_outputs(a.f[i][j], a.h[i][j], sink_t, delays)
            sums[j] = (s_fa, s_ha, pt)
            carries[j] = (c_fa, c_ha)
        for j in range(layout.J):
            parts = list(sums[j])
            if j:
                parts += list(carries[j - 1])
            times[(i + 1, j)] = np.concatenate(parts, axis=-1)
    return times


def evaluate_wiring(assignment: StageAssignment | TreeLayout, wiring: WiringPlan | None,
                    delays: DelayTable | None = None, input_arrivals=None,
                    ppm: PartialProductMatrix | None = None) -> WiringTiming:
    """Exact forward propagation of arrival times through the wired tree."""
    layout = assignment if isinstance(assignment, TreeLayout) else TreeLayout(assignment, ppm)
    delays = delays or DelayTable()
    wiring = wiring or identity_wiring(layout)
    check_wiring(layout, wiring)
    base = _input_times(layout, input_arrivals)
    times = _propagate(layout, lambda k: np.asarray(wiring.perms[k], dtype=int), delays, base)
    outputs = [times[(layout.S, j)].tolist() for j in range(layout.J)]
    flat = [t for col in outputs for t in col]
    return WiringTiming(times, outputs, max(flat) if flat else 0.0)


@dataclass
class DelayDistribution:
    delays: np.ndarray
    seed: int

    @property
    def min(self) -> float:
        return float(self.delays.min())

    @property
    def max(self) -> float:
        return float(self.delays.max())

    @property
    def spread_pct(self) -> float:
        lo = self.min
        return 0.0 if lo == 0 else 100.0 * (self.max - lo) / lo

    def summary(self) -> dict:
        return {"trials": int(len(self.delays)), "seed": self.seed, "min": self.min,
                "max": self.max, "mean": float(self.delays.mean()),
                "spread_pct": self.spread_pct}


def sample_random_wirings(assignment: StageAssignment | TreeLayout,
                          delays: DelayTable | None = None, trials: int = 10_000,
                          seed: int = 0, input_arrivals=None, batch: int = 2000,
                          ppm: PartialProductMatrix | None = None) -> DelayDistribution:
    """Critical delays of ``trials`` uniformly random wirings (seeded)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    layout = assignment if isinstance(assignment, TreeLayout) else TreeLayout(assignment, ppm)
    delays = delays or DelayTable()
    rng = np.random.default_rng(seed)
    base = _input_times(layout, input_arrivals)
    out = []
    done = 0
    while done < trials:
        n = min(batch, trials - done)
        perms = {k: np.argsort(rng.random((n, layout.size(*k))), axis=1)
                 for k in layout.slice_keys()}
        b = {k: np.broadcast_to(v, (n, len(v))).copy() for k, v in base.items()}
        times = _propagate(layout, perms.__getitem__, delays, b)
        cols = [times[(layout.S, j)] for j in range(layout.J) if times[(layout.S, j)].shape[1]]
        out.append(np.max(np.concatenate(cols, axis=1), axis=1) if cols else np.zeros(n))
        done += n
    return DelayDistribution(np.concatenate(out), seed)


def export_distribution(dist: DelayDistribution, csv_path: str | Path,
                        png_path: str | Path | None = None, bins: int = 40) -> None:
    """Write the sampled delays as CSV and, when matplotlib is present, a histogram."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "delay"])
        for k, v in enumerate(dist.delays.tolist()):
            w.writerow([k, repr(v)])
    if png_path is None:
        return
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", png_path)
        return
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(dist.delays, bins=bins, color="#4878a8")
    ax.set_xlabel("critical delay (units)")
    ax.set_ylabel("wirings")
    ax.set_title(f"{len(dist.delays)} random interconnect orders")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)


# -- greedy ----------------------------------------------------------------------

def _port_costs(sinks: Sequence[Sink], d: DelayTable) -> list[float]:
    cost = []
    for s in sinks:
        if s.kind == "pass":
            cost.append(0.0)
        elif s.kind == "ha":
            cost.append(max(d.t_s, d.t_c))
        else:
            k = "abc".index(s.port)
            cost.append(max(d.fa_sum[k], d.fa_carry[k]))
    return cost


def greedy_wiring(assignment: StageAssignment | TreeLayout, delays: DelayTable | None = None,
                  input_arrivals=None, ppm: PartialProductMatrix | None = None) -> WiringPlan:
    """Stage-by-stage: the latest sources go to the ports with the smallest
    port delay (passthroughs first, then 2:2, 3:2 C, 3:2 A/B)."""
    layout = assignment if isinstance(assignment, TreeLayout) else TreeLayout(assignment, ppm)
    delays = delays or DelayTable()
    times = _input_times(layout, input_arrivals)
    perms = {}
    for i in range(layout.S):
        for j in range(layout.J):
            src = times[(i, j)]
            sinks = layout.sinks[(i, j)]
            cost = _port_costs(sinks, delays)
            by_cost = sorted(range(len(sinks)), key=lambda v: (cost[v], v))
            by_late = sorted(range(len(src)), key=lambda u: (-src[u], u))
            perm = [0] * len(sinks)
            for v, u in zip(by_cost, by_late):
                perm[v] = u
            perms[(i, j)] = tuple(perm)
        nxt = _propagate_stage(layout, i, perms, delays, times)
        times.update(nxt)
    plan = WiringPlan(perms, method="greedy")
    plan.delay = evaluate_wiring(layout, plan, delays, input_arrivals).delay
    return plan


def _propagate_stage(layout, i, perms, delays, times):
    a = layout.assignment
    sums, carries, out = {}, {}, {}
    for j in range(layout.J):
        sink_t = times[(i, j)][np.asarray(perms[(i, j)], dtype=int)]
        s_fa, s_ha, pt, c_fa, c_ha = _slice_outputs(a.f[i][j], a.h[i][j], sink_t, delays)
        sums[j] = (s_fa, s_ha, pt)
        carries[j] = (c_fa, c_ha)
    for j in range(layout.J):
        parts = list(sums[j]) + (list(carries[j - 1]) if j else [])
        out[(i + 1, j)] = np.concatenate(parts)
    return out


# -- ILP -------------------------------------------------------------------------

def _zname(i, j, u, v):
    return f"z_{i}_{j}_{u}_{v}"


def _src(i, j, u):
    return f"t_{i}_{j}_{u}"


def _snk(i, j, v):
    return f"q_{i}_{j}_{v}"


def _arrival_ranges(layout: TreeLayout, delays: DelayTable, base):
    """Per-slice [lo, hi] enclosing every source arrival, by interval propagation."""
    a = layout.assignment
    fs, fc = max(delays.fa_sum), max(delays.fa_carry)
    rng = {}
    for j in range(layout.J):
        t = base[(0, j)]
        rng[(0, j)] = (float(t.min()), float(t.max())) if len(t) else (0.0, 0.0)
    for i in range(layout.S):
        for j in range(layout.J):
            los, his = [], []
            lo, hi = rng[(i, j)]
            f, h, pp = a.f[i][j], a.h[i][j], a.pp[i][j]
            if f:
                los.append(lo + fs)
                his.append(hi + fs)
            if h:
                los.append(lo + delays.t_s)
                his.append(hi + delays.t_s)
            if pp - 3 * f - 2 * h:
                los.append(lo)
                his.append(hi)
            if j:
                plo, phi = rng[(i, j - 1)]
                if a.f[i][j - 1]:
                    los.append(plo + fc)
                    his.append(phi + fc)
                if a.h[i][j - 1]:
                    los.append(plo + delays.t_c)
                    his.append(phi + delays.t_c)
            rng[(i + 1, j)] = (min(los), max(his)) if los else (0.0, 0.0)
    return rng


def build_wiring_model(assignment: StageAssignment | TreeLayout,
                       delays: DelayTable | None = None, input_arrivals=None,
                       ppm: PartialProductMatrix | None = None,
                       symmetry_breaking: bool = True) -> ilp.Model:
    """Min-max arrival model with one binary permutation matrix per slice.

    Source and sink arrivals are tied through ``|q_v - t_u| <= Z (1 - z_uv)``
    with ``Z`` the width of the slice's arrival range.  Slices with a
    single source or only passthrough sinks are fixed to the identity
    (every order is equivalent there).
    """
    layout = assignment if isinstance(assignment, TreeLayout) else TreeLayout(assignment, ppm)
    delays = delays or DelayTable()
    a = layout.assignment
    base = _input_times(layout, input_arrivals)
    rng = _arrival_ranges(layout, delays, base)
    m = ilp.Model(f"wiring_{layout.J}c_{layout.S}s")
    m.meta.update(kind="wiring", layout=layout, delays=delays, fixed={})
    top = max(hi for _, hi in rng.values()) if rng else 0.0
    M = m.add_var("M", "continuous", 0.0, top)

    for (i, j), (lo, hi) in rng.items():
        for u in range(len(layout.sources[(i, j)])):
            if i == 0:
                t = float(base[(0, j)][u])
                m.add_var(_src(0, j, u), "continuous", t, t)
            else:
                m.add_var(_src(i, j, u), "continuous", lo, hi)

    sym_ab = delays.t_as == delays.t_bs and delays.t_ac == delays.t_bc
    for i in range(layout.S):
        for j in range(layout.J):
            n = layout.size(i, j)
            sinks = layout.sinks[(i, j)]
            lo, hi = rng[(i, j)]
            Z = hi - lo
            f, h = a.f[i][j], a.h[i][j]
            for v in range(n):
                m.add_var(_snk(i, j, v), "continuous", lo, hi)
            if n <= 1 or f + h == 0:
                # the order cannot matter; tie ports to sources directly
                m.meta["fixed"][(i, j)] = tuple(range(n))
                for v in range(n):
                    m.add_constraint({_snk(i, j, v): 1, _src(i, j, v): -1}, "=", 0,
                                     name=f"fix_{i}_{j}_{v}")
            else:
                for u in range(n):
                    for v in range(n):
                        m.add_var(_zname(i, j, u, v), "binary")
                for u in range(n):
                    m.add_constraint({_zname(i, j, u, v): 1 for v in range(n)}, "=", 1,
                                     name=f"row_{i}_{j}_{u}")
                for v in range(n):
                    m.add_constraint({_zname(i, j, u, v): 1 for u in range(n)}, "=", 1,
                                     name=f"col_{i}_{j}_{v}")
                if Z > 0:
                    for u in range(n):
                        for v in range(n):
                            z = _zname(i, j, u, v)
                            m.add_constraint({_snk(i, j, v): 1, _src(i, j, u): -1, z: Z}, "<=",
                                             Z, name=f"lk1_{i}_{j}_{u}_{v}")
                            m.add_constraint({_src(i, j, u): 1, _snk(i, j, v): -1, z: Z}, "<=",
                                             Z, name=f"lk2_{i}_{j}_{u}_{v}")
                if symmetry_breaking:
                    _symmetry_rows(m, i, j, n, sinks, sym_ab)
            # compressor and passthrough outputs feed the next stage
            nxt_same = layout.sources[(i + 1, j)]
            for u2, s in enumerate(nxt_same):
                if s.stage != i or s.column != j:
                    continue
                _output_rows(m, s, _src(i + 1, j, u2), i, j, f, h, delays)
            if j + 1 < layout.J:
                for u2, s in enumerate(layout.sources[(i + 1, j + 1)]):
                    if s.stage == i and s.column == j:
                        _output_rows(m, s, _src(i + 1, j + 1, u2), i, j, f, h, delays)
    for j in range(layout.J):
        for u in range(layout.size(layout.S, j)):
            m.add_constraint({M: 1, _src(layout.S, j, u): -1}, ">=", 0, name=f"out_{j}_{u}")
    m.set_objective({M: 1.0}, "min")
    return m


def _sink_index(f: int, kind: str, k: int, port: str) -> int:
    if kind == "fa":
        return 3 * k + "abc".index(port)
    return 3 * f + 2 * k + "ab".index(port)


def _output_rows(m, s: Source, target, i, j, f, h, d: DelayTable):
    if s.kind in ("fa_s", "fa_c"):
        tab = d.fa_sum if s.kind == "fa_s" else d.fa_carry
        for p, dt in zip("abc", tab):
            v = _sink_index(f, "fa", s.index, p)
            m.add_constraint({target: 1, _snk(i, j, v): -1}, ">=", dt,
                             name=f"o_{target}_{p}")
    elif s.kind in ("ha_s", "ha_c"):
        dt = d.t_s if s.kind == "ha_s" else d.t_c
        for p in "ab":
            v = _sink_index(f, "ha", s.index, p)
            m.add_constraint({target: 1, _snk(i, j, v): -1}, ">=", dt,
                             name=f"o_{target}_{p}")
    else:
        v = 3 * f + 2 * h + s.index
        m.add_constraint({target: 1, _snk(i, j, v): -1}, "=", 0, name=f"o_{target}")


def _symmetry_rows(m, i, j, n, sinks: Sequence[Sink], sym_ab: bool):
    """Order interchangeable ports by the index of the source they receive."""

    def idx(v):
        return {_zname(i, j, u, v): u for u in range(1, n)}

    def less(v1, v2, tag):
        row = idx(v1)
        for name, c in idx(v2).items():
            row[name] = row.get(name, 0) - c
        m.add_constraint(row, "<=", -1, name=f"sym_{tag}_{i}_{j}_{v1}_{v2}")

    by_kind: dict[str, list[int]] = {}
    for v, s in enumerate(sinks):
        by_kind.setdefault(f"{s.kind}{s.port}", []).append(v)
    for v_list in (by_kind.get("faa", []), by_kind.get("haa", []), by_kind.get("pass", [])):
        for v1, v2 in zip(v_list, v_list[1:]):
            less(v1, v2, "ord")
    for v, s in enumerate(sinks):
        if s.kind == "ha" and s.port == "a":
            less(v, v + 1, "ab")
        if s.kind == "fa" and s.port == "a" and sym_ab:
            less(v, v + 1, "ab")


def wiring_hint(model: ilp.Model, plan: WiringPlan, input_arrivals=None) -> dict[str, float]:
    """Model values reproducing ``plan`` (arrivals from forward propagation)."""
    layout: TreeLayout = model.meta["layout"]
    delays: DelayTable = model.meta["delays"]
    timing = evaluate_wiring(layout, plan, delays, input_arrivals)
    vals = {name: 0.0 for name in model.variables}
    for (i, j), t in timing.sources.items():
        for u, x in enumerate(t.tolist()):
            vals[_src(i, j, u)] = x
    for (i, j), perm in plan.perms.items():
        src_t = timing.sources[(i, j)]
        for v, u in enumerate(perm):
            vals[_snk(i, j, v)] = float(src_t[u])
            z = _zname(i, j, u, v)
            if z in vals:
                vals[z] = 1.0
    vals["M"] = timing.delay
    return vals


def canonical_wiring(layout: TreeLayout, plan: WiringPlan, delays: DelayTable) -> WiringPlan:
    """Equivalent wiring satisfying the model's symmetry-breaking order.

    Relabels compressors (and, when A/B are symmetric, swaps their
    inputs) slice by slice; later slices are re-indexed so every physical
    connection is preserved.
    """
    a = layout.assignment
    sym_ab = delays.t_as == delays.t_bs and delays.t_ac == delays.t_bc
    perms = {k: list(v) for k, v in plan.perms.items()}
    for i in range(layout.S):
        relabel: dict[tuple[int, str], list[int]] = {}
        for j in range(layout.J):
            f, h = a.f[i][j], a.h[i][j]
            p = perms[(i, j)]
            fa = [p[3 * k:3 * k + 3] for k in range(f)]
            if sym_ab:
                fa = [sorted(x[:2]) + [x[2]] for x in fa]
            fa_order = sorted(range(f), key=lambda k: fa[k][0])
            ha = [sorted(p[3 * f + 2 * k:3 * f + 2 * k + 2]) for k in range(h)]
            ha_order = sorted(range(h), key=lambda k: ha[k][0])
            rest = p[3 * f + 2 * h:]
            pass_order = sorted(range(len(rest)), key=lambda k: rest[k])
            new = [u for k in fa_order for u in fa[k]]
            new += [u for k in ha_order for u in ha[k]]
            new += [rest[k] for k in pass_order]
            perms[(i, j)] = new
            relabel[(j, "fa")] = fa_order
            relabel[(j, "ha")] = ha_order
            relabel[(j, "pass")] = pass_order
        if i + 1 >= layout.S:
            continue
        # the new label n was old label order[n]; remap next-stage sources
        for j in range(layout.J):
            srcs = layout.sources[(i + 1, j)]
            pos = {(s.kind, s.column, s.index): u for u, s in enumerate(srcs)}
            old_to_new = list(range(len(srcs)))
            for u, s in enumerate(srcs):
                kind = {"fa_s": "fa", "fa_c": "fa", "ha_s": "ha", "ha_c": "ha",
                        "pass": "pass"}[s.kind]
                order = relabel[(s.column, kind)]
                new_index = order.index(s.index)
                old_to_new[u] = pos[(s.kind, s.column, new_index)]
            perms[(i + 1, j)] = [old_to_new[u] for u in perms[(i + 1, j)]]
    return WiringPlan({k: tuple(v) for k, v in perms.items()}, plan.delay, plan.method,
                      plan.optimal, list(plan.notes))


def decode_wiring(solution: ilp.Solution, model: ilp.Model) -> WiringPlan:
    if not solution.has_values:
        raise WiringError(f"no wiring in a solution with status {solution.status}")
    layout: TreeLayout = model.meta["layout"]
    fixed = model.meta["fixed"]
    perms = {}
    for key in layout.slice_keys():
        if key in fixed:
            perms[key] = fixed[key]
            continue
        i, j = key
        n = layout.size(i, j)
        perm = [-1] * n
        for u in range(n):
            for v in range(n):
                if solution.values[_zname(i, j, u, v)] > 0.5:
                    perm[v] = u
        if sorted(perm) != list(range(n)):
            raise WiringError(f"slice {key}: decoded matrix is not a permutation")
        perms[key] = tuple(perm)
    return WiringPlan(perms, method="ilp", optimal=solution.status == "optimal")


def wire_tree(assignment: StageAssignment | TreeLayout, method: str = "ilp",
              delays: DelayTable | None = None, *, input_arrivals=None,
              ppm: PartialProductMatrix | None = None, time_limit: float | None = 3600.0,
              backend: str = "internal", solver_path: str | None = None) -> WiringPlan:
    """Pick an interconnect order: ``ilp`` (optimal min-max), ``greedy`` or
    ``identity``.

    The ILP result is re-evaluated by forward propagation; its reported
    delay is the evaluated one and must match the model objective.
    """
    layout = assignment if isinstance(assignment, TreeLayout) else TreeLayout(assignment, ppm)
    delays = delays or DelayTable()
    if method == "identity":
        plan = identity_wiring(layout)
        plan.delay = evaluate_wiring(layout, plan, delays, input_arrivals).delay
        return plan
    greedy = greedy_wiring(layout, delays, input_arrivals)
    if method == "greedy":
        return greedy
    if method != "ilp":
        raise ValueError(f"unknown wiring method {method!r}")
    t0 = time.monotonic()
    model = build_wiring_model(layout, delays, input_arrivals)
    hint = wiring_hint(model, canonical_wiring(layout, greedy, delays), input_arrivals)
    sol = ilp.solve(model, time_limit, backend, solver_path=solver_path, initial=hint)
    if sol.status == "infeasible":
        raise WiringError("wiring model reported infeasible (model construction bug)")
    if sol.status == "timeout":
        greedy.notes.append("wiring ILP found no incumbent in time; greedy order used")
        return greedy
    plan = decode_wiring(sol, model)
    plan.delay = evaluate_wiring(layout, plan, delays, input_arrivals).delay
    if sol.status == "optimal" and abs(plan.delay - sol.objective) > 1e-6:
        raise WiringError(f"evaluated delay {plan.delay} differs from ILP objective "
                          f"{sol.objective}")
    if sol.status != "optimal":
        plan.notes.append("solver limit reached; wiring not proven optimal")
    log.debug("wiring %s: %s delay=%.3f in %.2fs", model.name, sol.status, plan.delay,
              time.monotonic() - t0)
    return plan
