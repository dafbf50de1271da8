"""Prefix-graph carry-propagate adders.

A node covers a bit range ``[msb:lsb]`` and combines its *trivial* fan-in
``tf`` (range ``[msb:k]``) with its *non-trivial* fan-in ``ntf`` (range
``[k-1:lsb]``):

    G = G_tf | P_tf & G_ntf,    P = P_tf & P_ntf

Input nodes are the bitwise ``g_i = a_i & b_i`` / ``p_i = a_i ^ b_i``.
Output ``i`` is the node covering ``[i:0]``; there is no carry-in, so
``c_i = G[i:0]`` and ``s_i = p_i ^ c_{i-1}``.

Node kinds: a non-input node is *blue* when it covers ``[i:0]`` and feeds
no other prefix node (it only has to produce G), otherwise *black*.
Depth counts prefix levels; input nodes are at depth 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


class TransformError(GraphError):
    """The transform's preconditions do not hold at the chosen node."""


@dataclass
class PrefixNode:
    id: int
    msb: int
    lsb: int
    tf: int | None = None
    ntf: int | None = None

    @property
    def is_input(self) -> bool:
        return self.tf is None


class PrefixGraph:
    def __init__(self, width: int, arrivals: Sequence[float] | None = None):
        if width < 1:
            raise GraphError("width must be >= 1")
        self.width = width
        self.nodes: dict[int, PrefixNode] = {i: PrefixNode(i, i, i) for i in range(width)}
        self.outputs: list[int] = list(range(width))
        self.arrivals = [0.0] * width if arrivals is None else [float(t) for t in arrivals]
        if len(self.arrivals) != width:
            raise GraphError(f"{len(self.arrivals)} arrivals for width {width}")
        self._next = width

    # -- construction ------------------------------------------------------
    def add(self, tf: int, ntf: int) -> int:
        a, b = self.nodes[tf], self.nodes[ntf]
        if a.lsb != b.msb + 1:
            raise GraphError(f"ranges [{a.msb}:{a.lsb}] and [{b.msb}:{b.lsb}] are not adjacent")
        nid = self._next
        self._next += 1
        self.nodes[nid] = PrefixNode(nid, a.msb, b.lsb, tf, ntf)
        return nid

    def set_output(self, bit: int, nid: int) -> None:
        n = self.nodes[nid]
        if (n.msb, n.lsb) != (bit, 0):
            raise GraphError(f"node {nid} covers [{n.msb}:{n.lsb}], not [{bit}:0]")
        self.outputs[bit] = nid

    def copy(self) -> "PrefixGraph":
        g = PrefixGraph.__new__(PrefixGraph)
        g.width = self.width
        g.nodes = {k: PrefixNode(v.id, v.msb, v.lsb, v.tf, v.ntf) for k, v in self.nodes.items()}
        g.outputs = list(self.outputs)
        g.arrivals = list(self.arrivals)
        g._next = self._next
        return g

    # -- queries -----------------------------------------------------------
    def is_input(self, nid: int) -> bool:
        return self.nodes[nid].is_input

    def live(self) -> set[int]:
        """Nodes reachable from the outputs."""
        seen: set[int] = set()
        stack = list(self.outputs)
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            node = self.nodes[n]
            if not node.is_input:
                stack += [node.tf, node.ntf]
        return seen

    def fanouts(self) -> dict[int, list[int]]:
        """Prefix-node consumers of every live node."""
        live = self.live()
        fo: dict[int, list[int]] = {n: [] for n in live}
        for n in sorted(live):
            node = self.nodes[n]
            if not node.is_input:
                fo[node.tf].append(n)
                fo[node.ntf].append(n)
        return fo

    def kinds(self, fo: dict[int, list[int]] | None = None) -> dict[int, str]:
        fo = self.fanouts() if fo is None else fo
        out = {}
        for n in fo:
            node = self.nodes[n]
            if node.is_input:
                out[n] = "input"
            elif node.lsb == 0 and not fo[n]:
                out[n] = "blue"
            else:
                out[n] = "black"
        return out

    def topo(self) -> list[int]:
        """Live nodes ordered so every node follows its fan-ins."""
        # a node's fan-ins cover strictly narrower ranges
        return sorted(self.live(), key=lambda n: (self.nodes[n].msb - self.nodes[n].lsb, n))

    def levels(self) -> dict[int, int]:
        lv = {}
        for n in self.topo():
            node = self.nodes[n]
            lv[n] = 0 if node.is_input else 1 + max(lv[node.tf], lv[node.ntf])
        return lv

    def depth(self, bit: int | None = None, lv: dict[int, int] | None = None) -> int:
        lv = self.levels() if lv is None else lv
        if bit is None:
            return max(lv[o] for o in self.outputs)
        return lv[self.outputs[bit]]

    def depth_profile(self) -> list[int]:
        lv = self.levels()
        return [lv[o] for o in self.outputs]

    def prefix_nodes(self) -> list[int]:
        return [n for n in sorted(self.live()) if not self.nodes[n].is_input]

    @property
    def size(self) -> int:
        """Number of live prefix (non-input) nodes."""
        return len(self.prefix_nodes())

    def max_fanout(self) -> int:
        return max((len(v) for v in self.fanouts().values()), default=0)

    def prune(self) -> int:
        live = self.live()
        dead = [n for n in self.nodes if n not in live and not self.nodes[n].is_input]
        for n in dead:
            del self.nodes[n]
        return len(dead)

    # -- checks ------------------------------------------------------------
    def validate(self) -> None:
        for i in range(self.width):
            node = self.nodes.get(i)
            if node is None or not node.is_input or (node.msb, node.lsb) != (i, i):
                raise GraphError(f"input node {i} missing or malformed")
        for n, node in self.nodes.items():
            if node.is_input:
                if n >= self.width:
                    raise GraphError(f"node {n} has no fan-ins")
                continue
            if node.ntf is None or node.tf not in self.nodes or node.ntf not in self.nodes:
                raise GraphError(f"node {n} has a dangling fan-in")
            a, b = self.nodes[node.tf], self.nodes[node.ntf]
            if a.msb != node.msb or b.lsb != node.lsb or a.lsb != b.msb + 1:
                raise GraphError(
                    f"node {n} [{node.msb}:{node.lsb}] = [{a.msb}:{a.lsb}] . [{b.msb}:{b.lsb}]"
                    " is not a contiguous split")
        for i, o in enumerate(self.outputs):
            node = self.nodes.get(o)
            if node is None or (node.msb, node.lsb) != (i, 0):
                raise GraphError(f"output {i} is not a [{i}:0] node")
        # ranges shrink strictly along fan-ins, so a valid graph is acyclic;
        # walk anyway to catch corrupted ids
        state: dict[int, int] = {}
        for root in self.outputs:
            stack = [(root, False)]
            while stack:
                n, done = stack.pop()
                if done:
                    state[n] = 2
                    continue
                if state.get(n) == 2:
                    continue
                if state.get(n) == 1:
                    raise GraphError(f"cycle through node {n}")
                state[n] = 1
                stack.append((n, True))
                node = self.nodes[n]
                if not node.is_input:
                    stack += [(node.tf, False), (node.ntf, False)]

    # -- evaluation --------------------------------------------------------
    def carries(self, g: np.ndarray, p: np.ndarray) -> np.ndarray:
        """``G[i:0]`` for every bit; ``g``/``p`` have the bit on axis 0."""
        G: dict[int, np.ndarray] = {}
        P: dict[int, np.ndarray] = {}
        for n in self.topo():
            node = self.nodes[n]
            if node.is_input:
                G[n], P[n] = g[node.msb], p[node.msb]
            else:
                G[n] = G[node.tf] | (P[node.tf] & G[node.ntf])
                P[n] = P[node.tf] & P[node.ntf]
        return np.stack([G[o] for o in self.outputs])

    def sum_bits(self, a_bits: np.ndarray, b_bits: np.ndarray) -> np.ndarray:
        """Sum bit-planes, shape ``(width + 1, ...)``; the last plane is carry-out."""
        g = a_bits & b_bits
        p = a_bits ^ b_bits
        c = self.carries(g, p)
        s = p.copy()
        s[1:] ^= c[:-1]
        return np.concatenate([s, c[-1:]], axis=0)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        live = sorted(self.live())
        return {
            "width": self.width,
            "arrivals": self.arrivals,
            "nodes": [asdict(self.nodes[n]) for n in live if not self.nodes[n].is_input],
            "outputs": self.outputs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrefixGraph":
        g = cls(d["width"], d.get("arrivals"))
        for nd in sorted(d["nodes"], key=lambda x: x["id"]):
            g.nodes[nd["id"]] = PrefixNode(nd["id"], nd["msb"], nd["lsb"], nd["tf"], nd["ntf"])
            g._next = max(g._next, nd["id"] + 1)
        g.outputs = list(d["outputs"])
        g.validate()
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_dot(self) -> str:
        kinds = self.kinds()
        lines = ["digraph prefix {", "  rankdir=TB;"]
        color = {"input": "white", "black": "black", "blue": "dodgerblue"}
        for n in sorted(kinds):
            node = self.nodes[n]
            font = "white" if kinds[n] == "black" else "black"
            lines.append(f'  n{n} [label="{node.msb}:{node.lsb}", style=filled, '
                         f'fillcolor={color[kinds[n]]}, fontcolor={font}];')
        for n in sorted(kinds):
            node = self.nodes[n]
            if not node.is_input:
                lines.append(f"  n{node.tf} -> n{n} [style=solid];")
                lines.append(f"  n{node.ntf} -> n{n} [style=dashed];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def to_bits(x: np.ndarray, width: int) -> np.ndarray:
    """Bit-planes (``width``, ...) of an unsigned integer array."""
    x = np.asarray(x, dtype=np.uint64)
    shifts = np.arange(width, dtype=np.uint64).reshape((width,) + (1,) * x.ndim)
    return ((x[None, ...] >> shifts) & np.uint64(1)).astype(bool)


def from_bits(bits: np.ndarray) -> list[int]:
    """Python integers from bit-planes (arbitrary width)."""
    out = np.zeros(bits.shape[1:], dtype=object)
    for i in range(bits.shape[0]):
        out = out + (bits[i].astype(object) << i)
    return out.tolist()


# -- region segmentation and initial structures ---------------------------------

@dataclass(frozen=True)
class Regions:
    region1: range
    region2: range
    region3: range

    @property
    def width(self) -> int:
        return len(self.region1) + len(self.region2) + len(self.region3)


def segment_regions(profile: Sequence[float], eps: float = 1.5) -> Regions:
    """Split an arrival profile into rising / flat / falling regions.

    The flat region is the longest contiguous run of bits arriving within
    ``eps`` of the latest bit (lowest such run on ties).
    """
    n = len(profile)
    if n == 0:
        return Regions(range(0), range(0), range(0))
    top = max(profile)
    best = (0, 0)
    start = None
    for i, t in enumerate(list(profile) + [-math.inf]):
        if t >= top - eps:
            if start is None:
                start = i
        elif start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    lo, hi = best
    return Regions(range(0, lo), range(lo, hi), range(hi, n))


def _sklansky(g: PrefixGraph, leaves: list[int]) -> list[int]:
    """Sklansky tree over contiguous ``leaves`` (LSB first); returns the node
    covering ``[leaf k : leaf 0]`` for every k."""
    cur = list(leaves)
    n = len(cur)
    d = 0
    while (1 << d) < n:
        nxt = list(cur)
        for i in range(n):
            if (i >> d) & 1:
                j = ((i >> d) << d) - 1
                nxt[i] = g.add(cur[i], cur[j])
        cur = nxt
        d += 1
    return cur


def _chain(g: PrefixGraph, leaves: list[int]) -> list[int]:
    cur = [leaves[0]]
    for leaf in leaves[1:]:
        cur.append(g.add(leaf, cur[-1]))
    return cur


def rca(width: int, arrivals=None) -> PrefixGraph:
    g = PrefixGraph(width, arrivals)
    for i, nid in enumerate(_chain(g, list(range(width)))):
        g.outputs[i] = nid
    return g


def sklansky(width: int, arrivals=None) -> PrefixGraph:
    g = PrefixGraph(width, arrivals)
    for i, nid in enumerate(_sklansky(g, list(range(width)))):
        g.outputs[i] = nid
    return g


def _increment_blocks(bits: range, arrivals: Sequence[float], step: float,
                      block_size: int | None) -> list[list[int]]:
    if not bits:
        return []
    if block_size:
        b = list(bits)
        return [b[k:k + block_size] for k in range(0, len(b), block_size)]
    ref = arrivals[bits[0]]
    blocks: list[list[int]] = []
    last_key = None
    for i in bits:
        key = math.floor((ref - arrivals[i]) / step) if step > 0 else 0
        if key != last_key:
            blocks.append([])
            last_key = key
        blocks[-1].append(i)
    return blocks


def build_initial_cpa(regions: Regions, width: int | None = None, arrivals=None,
                      step: float = 1.0, block_size: int | None = None) -> PrefixGraph:
    """Ripple chain on the rising region, Sklansky over the flat region
    (seeded with the ripple carry), carry-increment blocks on the falling
    region.

    Falling-region blocks group bits whose arrival lies in the same
    ``step``-wide band below the region's first bit, unless ``block_size``
    fixes the block length.
    """
    width = regions.width if width is None else width
    if regions.width != width:
        raise GraphError(f"regions cover {regions.width} bits, adder has {width}")
    g = PrefixGraph(width, arrivals)
    r1, r2, r3 = regions.region1, regions.region2, regions.region3
    if r1:
        for i, nid in zip(r1, _chain(g, list(r1))):
            g.outputs[i] = nid
    if r2:
        leaves = ([g.outputs[r1[-1]]] if r1 else []) + list(r2)
        tree = _sklansky(g, leaves)
        for i, nid in zip(r2, tree[1:] if r1 else tree):
            g.outputs[i] = nid
    for block in _increment_blocks(r3, g.arrivals, step, block_size):
        local = _chain(g, block)
        b0 = block[0]
        if b0 == 0:
            for i, nid in zip(block, local):
                g.outputs[i] = nid
            continue
        carry = g.outputs[b0 - 1]
        for i, nid in zip(block, local):
            g.outputs[i] = g.add(nid, carry)
    g.validate()
    return g


# -- sub-trees and the FDC timing model ----------------------------------------

@dataclass
class SubTree:
    """Fan-in cone of one output node inside a larger graph."""

    graph: PrefixGraph
    bit: int
    root: int
    nodes: set[int]

    @property
    def span(self) -> int:
        return self.bit + 1

    def prefix_nodes(self) -> list[int]:
        return sorted(n for n in self.nodes if not self.graph.nodes[n].is_input)


def extract_subtree(g: PrefixGraph, bit: int) -> SubTree:
    if not 0 <= bit < g.width:
        raise GraphError(f"bit {bit} outside width {g.width}")
    root = g.outputs[bit]
    seen: set[int] = set()
    stack = [root]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        node = g.nodes[n]
        if not node.is_input:
            stack += [node.tf, node.ntf]
    return SubTree(g, bit, root, seen)


@dataclass(frozen=True)
class FdcFeatures:
    f_black: int = 0
    f_blue: int = 0
    n_black: int = 0
    n_blue: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([self.f_black, self.f_blue, self.n_black, self.n_blue], dtype=float)


@dataclass
class FdcModel:
    k0: float = 0.5  # per fanout to a black node, along the path
    k1: float = 0.5  # per fanout to a blue node
    k2: float = 1.0  # per black node
    k3: float = 0.5  # per blue node
    b: float = 1.0
    r2: float | None = None
    mape: float | None = None

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.k0, self.k1, self.k2, self.k3, self.b])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FdcModel":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def fdc_delay(features: FdcFeatures | Sequence[float], model: FdcModel | None = None) -> float:
    model = model or FdcModel()
    x = features.as_array() if isinstance(features, FdcFeatures) else np.asarray(features, float)
    return float(model.coefficients[:4] @ x + model.b)


class _Timing:
    """Per-node FDC contributions for one graph state."""

    def __init__(self, g: PrefixGraph, model: FdcModel):
        self.g = g
        self.model = model
        self.fo = g.fanouts()
        self.kind = g.kinds(self.fo)

    def contrib(self, n: int) -> float:
        k = self.kind[n]
        if k == "input":
            return 0.0
        if k == "blue":
            return self.model.k3
        fb, fu = self.fan_split(n)
        return self.model.k0 * fb + self.model.k1 * fu + self.model.k2

    def fan_split(self, n: int) -> tuple[int, int]:
        fb = sum(1 for c in self.fo[n] if self.kind[c] == "black")
        return fb, len(self.fo[n]) - fb

    def cone_delay(self, root: int, use_arrivals: bool):
        """Longest weighted path into ``root``; returns (delay, path root->leaf)."""
        best: dict[int, float] = {}
        order = sorted(extract_subtree_nodes(self.g, root),
                       key=lambda n: (self.g.nodes[n].msb - self.g.nodes[n].lsb, n))
        pick: dict[int, int] = {}
        for n in order:
            node = self.g.nodes[n]
            if node.is_input:
                best[n] = self.g.arrivals[node.msb] if use_arrivals else 0.0
            else:
                a, b = best[node.tf], best[node.ntf]
                # ties go to the deeper ntf side, then tf
                pick[n] = node.ntf if b >= a else node.tf
                best[n] = self.contrib(n) + max(a, b)
        path = [root]
        while path[-1] in pick:
            path.append(pick[path[-1]])
        return best[root] + self.model.b, path

    def features(self, path: Iterable[int]) -> FdcFeatures:
        fb = fu = nb = nu = 0
        for n in path:
            k = self.kind[n]
            if k == "black":
                nb += 1
                b, u = self.fan_split(n)
                fb += b
                fu += u
            elif k == "blue":
                nu += 1
        return FdcFeatures(fb, fu, nb, nu)


def extract_subtree_nodes(g: PrefixGraph, root: int) -> set[int]:
    seen: set[int] = set()
    stack = [root]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        node = g.nodes[n]
        if not node.is_input:
            stack += [node.tf, node.ntf]
    return seen


def fdc_path(fragment: SubTree, model: FdcModel | None = None,
             use_arrivals: bool = False) -> tuple[list[int], FdcFeatures, float]:
    """The FDC-maximizing root-to-leaf path of a sub-tree, its features and
    delay.  Fanouts are counted in the whole graph."""
    t = _Timing(fragment.graph, model or FdcModel())
    delay, path = t.cone_delay(fragment.root, use_arrivals)
    return path, t.features(path), delay


def fdc_features(fragment: SubTree, model: FdcModel | None = None) -> FdcFeatures:
    return fdc_path(fragment, model)[1]


def bit_delays(g: PrefixGraph, model: FdcModel | None = None,
               use_arrivals: bool = True) -> list[float]:
    t = _Timing(g, model or FdcModel())
    return [t.cone_delay(o, use_arrivals)[0] for o in g.outputs]


@dataclass
class FitReport:
    model: FdcModel
    r2: float
    mape: float


def _r2_mape(y: np.ndarray, yhat: np.ndarray) -> tuple[float, float]:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    nz = y != 0
    mape = float(np.mean(np.abs((y[nz] - yhat[nz]) / y[nz]))) * 100 if nz.any() else 0.0
    return r2, mape


def fit_fdc(samples: Sequence[tuple[FdcFeatures | Sequence[float], float]]) -> FdcModel:
    """Least-squares FDC coefficients with ``k0..k3 >= 0``; reports R² and MAPE."""
    from scipy.optimize import lsq_linear

    if len(samples) < 5:
        raise ValueError(f"need at least 5 samples to fit 5 coefficients, got {len(samples)}")
    X = np.array([s.as_array() if isinstance(s, FdcFeatures) else np.asarray(s, float)
                  for s, _ in samples])
    y = np.array([d for _, d in samples], dtype=float)
    A = np.column_stack([X, np.ones(len(y))])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise ValueError("feature matrix is rank deficient; add adders with more diverse "
                         "depth/fanout/blue-node mixes")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    if (coef[:4] < 0).any():
        lo = np.array([0, 0, 0, 0, -np.inf])
        coef = lsq_linear(A, y, bounds=(lo, np.full(5, np.inf)), method="bvls",
                          tol=1e-12).x
    r2, mape = _r2_mape(y, A @ coef)
    return FdcModel(*map(float, coef), r2=r2, mape=mape)


def fit_depth_only(samples: Sequence[tuple[int, float]]) -> tuple[float, float, float, float]:
    """``delay = k * depth + b``; returns (k, b, R², MAPE)."""
    x = np.array([d for d, _ in samples], dtype=float)
    y = np.array([t for _, t in samples], dtype=float)
    A = np.column_stack([x, np.ones(len(x))])
    (k, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    r2, mape = _r2_mape(y, A @ np.array([k, b]))
    return float(k), float(b), r2, mape


# -- GraphOpt transforms --------------------------------------------------------

def graph_opt(g: PrefixGraph, p: int) -> int:
    """Re-associate ``p = tf . (B . C)`` into ``p = (tf . B) . C``.

    Creates ``s`` with ``tf(s) = tf(p)`` and ``ntf(s) = tf(ntf(p))``, then
    sets ``tf(p) = s`` and ``ntf(p) = ntf(ntf(p))``.  ``p`` keeps its range
    and function; the old ``ntf(p)`` is left for :meth:`PrefixGraph.prune`.
    """
    node = g.nodes.get(p)
    if node is None or node.is_input:
        raise TransformError(f"node {p} is an input (or missing)")
    q = g.nodes[node.ntf]
    if q.is_input:
        raise TransformError(f"ntf of node {p} is an input")
    s = g.add(node.tf, q.tf)
    node.tf, node.ntf = s, q.ntf
    return s


def depth_opt(g: PrefixGraph, p: int) -> int:
    return graph_opt(g, p)


def fanout_opt(g: PrefixGraph, p: int) -> int:
    return graph_opt(g, p)


def _applicable(g: PrefixGraph, p: int) -> bool:
    node = g.nodes[p]
    return not node.is_input and not g.nodes[node.ntf].is_input


def _level_after(g: PrefixGraph, lv: dict[int, int], p: int) -> int:
    node = g.nodes[p]
    q = g.nodes[node.ntf]
    ls = 1 + max(lv[node.tf], lv[q.tf])
    return 1 + max(ls, lv[q.ntf])


def depth_bound(span: int) -> int:
    return math.ceil(math.log2(span)) if span > 1 else 0


def _depth_candidates(g: PrefixGraph, bit: int) -> list[int]:
    """Nodes on a deepest path of ``bit``'s cone whose re-association lowers
    their own level, lowest level first (low nodes serve more outputs)."""
    lv = g.levels()
    root = g.outputs[bit]
    on_path = []
    stack = [root]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        on_path.append(n)
        node = g.nodes[n]
        if node.is_input:
            continue
        for c in (node.tf, node.ntf):
            if lv[c] == lv[n] - 1:
                stack.append(c)
    cands = [n for n in on_path if _applicable(g, n) and _level_after(g, lv, n) < lv[n]]
    return sorted(cands, key=lambda n: (lv[n], n))


def _lowering_plan(g: PrefixGraph, root: int, target: int) -> list[int] | None:
    """Ordered re-association points that bring ``root`` to level ``target``.

    Used when no single transform lowers a deep cone (each step alone
    leaves its node's level unchanged).  A node joining ``A`` and ``Q``
    reaches level ``T`` either by lowering both fan-ins to ``T - 1``, or,
    when ``Q = B . C``, by re-associating into ``(A . B) . C`` with ``C`` at
    ``T - 1`` and the new ``A . B`` node itself brought to ``T - 1`` the same
    way.  Returns None when no such plan exists.
    """
    lv = g.levels()
    memo: dict[tuple, bool] = {}

    def span(lo_node, hi_node):
        return g.nodes[hi_node].msb - g.nodes[lo_node].lsb + 1

    def node_ok(n, t):
        if lv[n] <= t:
            return True
        node = g.nodes[n]
        return not node.is_input and pair_ok(node.tf, node.ntf, t)

    def pair_ok(a, q, t):
        key = (a, q, t)
        if key not in memo:
            if t <= 0 or span(q, a) > (1 << t):
                memo[key] = False
            elif node_ok(a, t - 1) and node_ok(q, t - 1):
                memo[key] = True
            else:
                qn = g.nodes[q]
                memo[key] = (not qn.is_input and node_ok(qn.ntf, t - 1)
                             and pair_ok(a, qn.tf, t - 1))
        return memo[key]

    if not node_ok(root, target):
        return None
    trial = g.copy()
    ops: list[int] = []
    done: dict[int, int] = {}

    def emit_node(n, t):
        if min(done.get(n, lv[n]), lv[n]) <= t:
            return
        node = g.nodes[n]
        emit_pair(n, node.tf, node.ntf, t)
        done[n] = t

    def emit_pair(p, a, q, t):
        cur = trial.nodes[p]
        if (cur.tf, cur.ntf) != (a, q):
            raise TransformError(f"node {p} was reshaped earlier in the plan")
        if node_ok(a, t - 1) and node_ok(q, t - 1):
            emit_node(a, t - 1)
            emit_node(q, t - 1)
            return
        qn = g.nodes[q]
        ops.append(p)
        s = graph_opt(trial, p)
        emit_node(qn.ntf, t - 1)
        emit_pair(s, a, qn.tf, t - 1)

    try:
        emit_node(root, target)
    except TransformError:
        return None
    return ops


SIBLING_RULES = ("critical", "cone")


def _fanout_candidate(g: PrefixGraph, bit: int, model: FdcModel,
                      rule: str = "critical") -> int | None:
    """Node whose ntf drives the most prefix nodes: searched on the
    FDC-critical path of ``bit`` (``critical``) or over its whole cone
    (``cone``)."""
    t = _Timing(g, model)
    if rule == "critical":
        _, path = t.cone_delay(g.outputs[bit], True)
    else:
        path = sorted(extract_subtree_nodes(g, g.outputs[bit]))
    best = None
    for p in path:
        if not _applicable(g, p):
            continue
        q = g.nodes[p].ntf
        key = (len(t.fo[q]), -p)
        if len(t.fo[q]) > 1 and (best is None or key > best[0]):
            best = (key, p)
    return None if best is None else best[1]


@dataclass
class OptimizeResult:
    graph: PrefixGraph
    steps: list[tuple[str, int, int]] = field(default_factory=list)  # (kind, bit, node)
    unmet: list[int] = field(default_factory=list)
    delays: list[float] = field(default_factory=list)


def optimize_cpa(g: PrefixGraph, constraints: Sequence[float], model: FdcModel | None = None,
                 max_steps: int | None = None, on_step: Callable[[PrefixGraph], None] | None = None,
                 use_arrivals: bool = True, sibling_rule: str = "critical") -> OptimizeResult:
    """Timing-driven refinement, MSB to LSB, until every bit meets its budget.

    A violated bit whose cone is deeper than ``ceil(log2 span) + 1`` gets a
    depth transform; otherwise a fanout transform at the critical-path
    node whose ntf has the largest fanout.  A transform is kept only if it
    lowers that bit's FDC delay, no bit that met its budget stops meeting
    it, and no cone within the depth guard leaves it.  Stops at a fixed point or after
    ``max_steps`` (default ``10 * width``) transforms.  A first pass
    applies only depth transforms so fanout trades never lock in an
    over-deep cone.  ``sibling_rule="cone"`` widens the fanout search from
    the critical path to the bit's whole cone.  The input graph is not
    modified.
    """
    if sibling_rule not in SIBLING_RULES:
        raise ValueError(f"unknown sibling rule {sibling_rule!r}")
    model = model or FdcModel()
    g = g.copy()
    n = g.width
    if len(constraints) != n:
        raise GraphError(f"{len(constraints)} constraints for width {n}")
    max_steps = 10 * n if max_steps is None else max_steps
    res = OptimizeResult(g)
    delays = bit_delays(g, model, use_arrivals)
    # depth guard first: fix over-deep cones before trading fanout
    for depth_only in (True, False):
        progress = True
        while progress and len(res.steps) < max_steps:
            progress = False
            for bit in range(n - 1, -1, -1):
                while delays[bit] > constraints[bit] + 1e-9 and len(res.steps) < max_steps:
                    applied = _try_transform(g, bit, delays, constraints, model,
                                             use_arrivals, res, depth_only, sibling_rule)
                    if applied is None:
                        break
                    delays = applied
                    progress = True
                    if on_step is not None:
                        on_step(g)
    g.prune()
    res.delays = bit_delays(g, model, use_arrivals)
    res.unmet = [b for b in range(n) if res.delays[b] > constraints[b] + 1e-9]
    return res


def _try_transform(g, bit, delays, constraints, model, use_arrivals, res, depth_only=False,
                   sibling_rule="critical"):
    """Apply one accepted transform for a violated ``bit``; returns the new
    bit delays or None when nothing is accepted.

    Depth transforms must lower the level of the node they rewrite (or,
    as a fallback, apply a multi-step plan that lowers the bit); fanout
    transforms must lower the bit's FDC delay.  Neither may push a bit
    that met its budget over it, nor a cone within the depth guard
    beyond it.
    """
    lv = g.levels()
    above = lv[g.outputs[bit]] > depth_bound(bit + 1) + 1

    def acceptable(new):
        return not any(delays[b] <= constraints[b] + 1e-9 < new[b] for b in range(g.width))

    def keeps_depth_guard(trial):
        after = trial.levels()
        for b in range(g.width):
            limit = depth_bound(b + 1) + 1
            if lv[g.outputs[b]] <= limit < after[trial.outputs[b]]:
                return False
        return True

    def attempt(kind, p, need_gain):
        ops = p if isinstance(p, list) else [p]
        trial = g.copy()
        for q in ops:
            graph_opt(trial, q)
        if kind == "depth" and isinstance(p, list):
            # a shared node rewritten earlier in the plan can void its premise
            if trial.levels()[trial.outputs[bit]] >= lv[g.outputs[bit]]:
                return None
        new = bit_delays(trial, model, use_arrivals)
        if need_gain and not new[bit] < delays[bit] - 1e-9:
            return None
        if not acceptable(new) or not keeps_depth_guard(trial):
            return None
        for q in ops:
            graph_opt(g, q)
            res.steps.append((kind, bit, q))
        return new

    if above:
        for p in _depth_candidates(g, bit):
            new = attempt("depth", p, need_gain=False)
            if new is not None:
                return new
        plan = _lowering_plan(g, g.outputs[bit], lv[g.outputs[bit]] - 1)
        if plan:
            new = attempt("depth", plan, need_gain=False)
            if new is not None:
                return new
    if depth_only:
        return None
    p = _fanout_candidate(g, bit, model, sibling_rule)
    if p is not None:
        new = attempt("fanout", p, need_gain=True)
        if new is not None:
            return new
    if not above:
        for p in _depth_candidates(g, bit):
            new = attempt("depth", p, need_gain=True)
            if new is not None:
                return new
    return None
