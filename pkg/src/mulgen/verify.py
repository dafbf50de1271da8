"""Functional checks: bit-parallel simulation against arithmetic references."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ct_plan import ColumnPlan
from .ilp.model import FEAS_TOL, Model
from .netlist import CONSTS, GateNetlist, evaluate_gate

EXHAUSTIVE_MAX_BITS = 20
ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


class VerifyError(ValueError):
    pass


# -- bit-plane helpers -----------------------------------------------------------

def pack(bits: np.ndarray) -> np.ndarray:
    """(V,) bool -> packed uint64 words, vector v at word v//64, bit v%64."""
    v = len(bits)
    pad = (-v) % 64
    b = np.concatenate([bits.astype(bool), np.zeros(pad, bool)])
    return np.packbits(b, bitorder="little").view(np.uint64)


def unpack(words: np.ndarray, n: int) -> np.ndarray:
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:n].astype(bool)


def simulate(nl: GateNetlist, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Evaluate all vectors at once.

    ``inputs`` maps each input port to a (V, width) bool array; the result
    maps each output port to a (V, width) bool array.
    """
    n = None
    val: dict[str, np.ndarray] = {}
    for port, width in nl.inputs.items():
        arr = np.asarray(inputs[port], dtype=bool)
        if arr.ndim != 2 or arr.shape[1] != width:
            raise VerifyError(f"port {port}: expected (V, {width}) bits, got {arr.shape}")
        if n is None:
            n = arr.shape[0]
        elif arr.shape[0] != n:
            raise VerifyError("ports disagree on the number of vectors")
        for i in range(width):
            val[f"{port}[{i}]"] = pack(arr[:, i])
    if n is None:
        raise VerifyError("netlist has no inputs")
    words = len(next(iter(val.values())))
    val["1'b0"] = np.zeros(words, np.uint64)
    val["1'b1"] = np.full(words, ALL, np.uint64)
    order = nl.topo_order()
    keep = {x for nets in nl.outputs.values() for x in nets}
    last = {}
    for k, g in enumerate(order):
        for x in g.inputs:
            last[x] = k
    for k, g in enumerate(order):
        val[g.output] = evaluate_gate(g.kind, [val[x] for x in g.inputs], ALL)
        for x in g.inputs:
            if last[x] == k and x not in keep and x not in CONSTS:
                del val[x]
    return {p: np.stack([unpack(val[x], n) for x in nets], axis=1) if nets else
            np.zeros((n, 0), bool) for p, nets in nl.outputs.items()}


_TRUTH = {
    "AND": lambda a, b: a and b,
    "NAND": lambda a, b: not (a and b),
    "NOR": lambda a, b: not (a or b),
    "XOR": lambda a, b: a != b,
    "XNOR": lambda a, b: a == b,
    "AOI21": lambda a, b, c: not ((a and b) or c),
    "OAI21": lambda a, b, c: not ((a or b) and c),
    "INV": lambda a: not a,
}


def evaluate_recursive(nl: GateNetlist, inputs: Mapping[str, int]) -> dict[str, int]:
    """One vector, integers per port, by memoized backward recursion.

    Written independently of :func:`simulate` so the two can cross-check.
    """
    memo: dict[str, bool] = {c: bool(v) for c, v in CONSTS.items()}
    for port, width in nl.inputs.items():
        for i in range(width):
            memo[f"{port}[{i}]"] = bool((inputs[port] >> i) & 1)

    def get(net: str) -> bool:
        stack = [net]
        while stack:
            top = stack[-1]
            if top in memo:
                stack.pop()
                continue
            g = nl.driver[top]
            todo = [x for x in g.inputs if x not in memo]
            if todo:
                stack.extend(todo)
            else:
                memo[top] = bool(_TRUTH[g.kind](*[memo[x] for x in g.inputs]))
                stack.pop()
        return memo[net]

    return {p: sum(int(get(x)) << i for i, x in enumerate(nets))
            for p, nets in nl.outputs.items()}


# -- reference arithmetic on 32-bit limbs -------------------------------------------

def _limbs(bits: np.ndarray, n_limbs: int) -> np.ndarray:
    v, w = bits.shape
    out = np.zeros((v, n_limbs), np.uint64)
    for i in range(w):
        out[:, i // 32] |= bits[:, i].astype(np.uint64) << np.uint64(i % 32)
    return out


def _normalize(acc: np.ndarray) -> np.ndarray:
    acc = acc.copy()
    m = np.uint64(0xFFFFFFFF)
    for k in range(acc.shape[1] - 1):
        acc[:, k + 1] += acc[:, k] >> np.uint64(32)
        acc[:, k] &= m
    return acc


def _bits(limbs: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((limbs.shape[0], width), bool)
    for i in range(width):
        out[:, i] = (limbs[:, i // 32] >> np.uint64(i % 32)) & np.uint64(1)
    return out


def reference(kind: str, inputs: Mapping[str, np.ndarray], out_width: int) -> np.ndarray:
    """Expected output bits for ``mult`` (a*b), ``mac`` (a*b+c) or ``add`` (a+b)."""
    a, b = inputs["a"], inputs["b"]
    L = (max(a.shape[1], b.shape[1], inputs["c"].shape[1] if "c" in inputs else 0,
             out_width) + 31) // 32 + 1
    la, lb = _limbs(a, L), _limbs(b, L)
    acc = np.zeros((a.shape[0], 2 * L + 1), np.uint64)
    if kind in ("mult", "mac"):
        m = np.uint64(0xFFFFFFFF)
        for i in range(L):
            for k in range(L):
                prod = la[:, i] * lb[:, k]
                acc[:, i + k] += prod & m
                acc[:, i + k + 1] += prod >> np.uint64(32)
        if kind == "mac":
            acc[:, :L] += _limbs(inputs["c"], L)
    elif kind == "add":
        acc[:, :L] += la + lb
    else:
        raise VerifyError(f"no reference for design kind {kind!r}")
    return _bits(_normalize(acc), out_width)


def ct_reference(nl: GateNetlist, x: np.ndarray) -> np.ndarray:
    """The weighted column sum of a compressor-tree netlist's input bits."""
    cols = nl.meta["columns"]
    width = len(nl.outputs["r0"]) + 1
    v = x.shape[0]
    acc = np.zeros((v, width + 1), np.int64)
    for k, j in enumerate(cols):
        acc[:, j] += x[:, k]
    for j in range(width):
        acc[:, j + 1] += acc[:, j] >> 1
        acc[:, j] &= 1
    return acc[:, :width].astype(bool)


# -- equivalence --------------------------------------------------------------------

@dataclass
class EquivalenceReport:
    passed: bool
    mode: str
    vectors: int
    mismatches: int = 0
    counterexample: dict | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _to_int(bits: np.ndarray) -> int:
    return sum(int(bool(x)) << i for i, x in enumerate(bits))


def exhaustive_inputs(widths: Mapping[str, int]) -> dict[str, np.ndarray]:
    total = sum(widths.values())
    if total > EXHAUSTIVE_MAX_BITS:
        raise VerifyError(f"{total} input bits is too many for exhaustive simulation")
    idx = np.arange(1 << total, dtype=np.int64)
    out, shift = {}, 0
    for port, w in widths.items():
        out[port] = ((idx[:, None] >> (shift + np.arange(w))) & 1).astype(bool)
        shift += w
    return out


def corner_inputs(widths: Mapping[str, int]) -> dict[str, np.ndarray]:
    """Cross product of all-zero, one, all-ones, alternating and top-bit words."""
    pats = {}
    for port, w in widths.items():
        i = np.arange(w)
        rows = [np.zeros(w, bool), i == 0, np.ones(w, bool), i % 2 == 0, i % 2 == 1,
                i == w - 1, i != 0]
        pats[port] = rows
    combos = list(itertools.product(*[range(len(r)) for r in pats.values()]))
    return {port: np.array([pats[port][c[k]] for c in combos])
            for k, port in enumerate(pats)}


def random_inputs(widths: Mapping[str, int], n: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {p: rng.integers(0, 2, size=(n, w)).astype(bool) for p, w in widths.items()}


CHUNK = 1 << 16


def _compare(nl: GateNetlist, kind: str, vec: Mapping[str, np.ndarray]):
    got = simulate(nl, vec)
    if kind == "ct":
        exp = ct_reference(nl, vec["x"])
        got_bits = reference("add", {"a": got["r0"], "b": got["r1"]}, exp.shape[1])
        port = "r0+r1"
    else:
        port = next(iter(nl.outputs))
        exp = reference(kind, vec, len(nl.outputs[port]))
        got_bits = got[port]
    return port, exp, got_bits


def _chunks(widths, mode, n, seed):
    if mode == "exhaustive":
        vec = exhaustive_inputs(widths)
        size = len(next(iter(vec.values())))
        for k in range(0, size, CHUNK):
            yield {p: v[k:k + CHUNK] for p, v in vec.items()}
        return
    yield corner_inputs(widths)
    rng = np.random.default_rng(seed)
    for k in range(0, n, CHUNK):
        m = min(CHUNK, n - k)
        yield {p: rng.integers(0, 2, size=(m, w), dtype=np.uint8).astype(bool)
               for p, w in widths.items()}


def check_equivalence(nl: GateNetlist, mode: str = "auto", n: int = 10000, seed: int = 0,
                      kind: str | None = None) -> EquivalenceReport:
    """Compare the netlist with integer arithmetic.

    ``mode``: ``exhaustive`` (at most 20 input bits), ``random`` (``n``
    vectors plus corner cases), or ``auto`` which picks exhaustive when it fits.
    """
    kind = kind or nl.meta.get("kind")
    if kind not in ("mult", "mac", "add", "ct"):
        raise VerifyError(f"unknown design kind {kind!r}")
    widths = dict(nl.inputs)
    total = sum(widths.values())
    if mode == "auto":
        mode = "exhaustive" if total <= EXHAUSTIVE_MAX_BITS else "random"
    if mode not in ("exhaustive", "random"):
        raise VerifyError(f"unknown mode {mode!r}")
    rep = EquivalenceReport(True, mode, 0)
    for vec in _chunks(widths, mode, n, seed):
        port, exp, got_bits = _compare(nl, kind, vec)
        bad = np.nonzero((got_bits != exp).any(axis=1))[0]
        if len(bad) and rep.counterexample is None:
            v = int(bad[0])
            rep.counterexample = {
                "inputs": {p: _to_int(vec[p][v]) for p in widths},
                "expected": {port: _to_int(exp[v])},
                "got": {port: _to_int(got_bits[v])},
                "differing_bits": np.nonzero(got_bits[v] != exp[v])[0].tolist(),
            }
        rep.mismatches += int(len(bad))
        rep.vectors += len(exp)
    rep.passed = rep.mismatches == 0
    return rep


# -- small exhaustive oracles --------------------------------------------------------

BRUTE_MAX_BITS = 6
BRUTE_MAX_COLUMNS = 4


@dataclass
class BruteResult:
    area: float
    min_count: list[int]  # fewest compressors any legal configuration puts in each column
    configurations: int


def brute_force_ct(heights: Sequence[int]) -> BruteResult:
    """Enumerate every per-column (full, half) choice that leaves one or two
    bits per column, with carries rippling upward.

    A column's sums re-enter it in later stages, so a column of ``t`` bits
    can host any mix with ``1 <= t - 2f - h <= 2``.
    """
    heights = list(heights)
    if sum(heights) > BRUTE_MAX_BITS or len(heights) > BRUTE_MAX_COLUMNS:
        raise VerifyError(f"state space too large for {heights}")
    best = [float("inf")]
    n_cols = len(heights) + BRUTE_MAX_BITS
    min_count = [10 ** 9] * n_cols
    count = [0]

    def rec(j, carry, area, counts):
        t = (heights[j] if j < len(heights) else 0) + carry
        if j >= len(heights) and t == 0:
            count[0] += 1
            best[0] = min(best[0], area)
            for k in range(n_cols):
                c = counts[k] if k < len(counts) else 0
                min_count[k] = min(min_count[k], c)
            return
        for f in range(t // 2 + 1):
            for h in range(t - 2 * f + 1):
                if 1 <= t - 2 * f - h <= 2 or t == 0:
                    rec(j + 1, f + h, area + 3 * f + 2 * h, counts + [f + h])

    rec(0, 0, 0.0, [])
    last = max((k for k, c in enumerate(min_count) if c), default=-1)
    return BruteResult(best[0], min_count[:max(last + 1, len(heights))], count[0])


def plan_counts(plans: Sequence[ColumnPlan]) -> list[int]:
    return [p.f + p.h for p in plans]


ENUM_MAX_VARS = 12


def enumerate_model(model: Model) -> tuple[float | None, dict | None]:
    """Optimum of a pure 0/1 model by trying every assignment."""
    names = list(model.variables)
    if len(names) > ENUM_MAX_VARS:
        raise VerifyError(f"{len(names)} variables is too many to enumerate")
    for v in model.variables.values():
        if not (v.is_integral and v.lb >= 0 and v.ub <= 1):
            raise VerifyError(f"variable {v.name} is not binary")
    best, arg = None, None
    sign = 1 if model.objective_sense == "min" else -1
    for bits in itertools.product((0.0, 1.0), repeat=len(names)):
        x = dict(zip(names, bits))
        if model.max_violation(x) > FEAS_TOL:
            continue
        val = model.objective_value(x)
        if best is None or sign * val < sign * best - 1e-12:
            best, arg = val, x
    return best, arg
