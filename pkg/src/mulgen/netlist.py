"""Flat gate-level netlists: elaboration, Verilog/JSON output, reports.

Nets are strings.  Primary-input bits are named ``port[i]``; ``1'b0`` and
``1'b1`` are the constant nets.  Primary outputs map each port bit to the
net that drives it.

3:2 compressor (sum and carry as XNOR/NAND/OAI)::

    xn = XNOR(a, b);  s = XNOR(xn, c)
    nab = NAND(a, b); nc = INV(c);  co = OAI21(xn, nc, nab)

2:2 compressor: ``s = XOR(a, b)``, ``co = AND(a, b)``.

Prefix nodes alternate polarity: AOI21 + NAND turn positive (G, P) into
inverted ones, OAI21 + NOR turn inverted into positive.  An INV fixes a
fan-in whose polarity differs from the node's trivial fan-in.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Mapping, Sequence

from .cpa import PrefixGraph
from .ct_assign import StageAssignment
from .ct_wire import TreeLayout, WiringPlan, identity_wiring
from .ppg import PartialProductMatrix

SCHEMA = "mulgen.netlist/1"
CONST0 = "1'b0"
CONST1 = "1'b1"
CONSTS = {CONST0: 0, CONST1: 1}

KINDS = {"AND": 2, "NAND": 2, "NOR": 2, "XOR": 2, "XNOR": 2, "OAI21": 3, "AOI21": 3, "INV": 1}


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    kind: str
    inputs: tuple[str, ...]
    output: str


@dataclass
class GateLibrary:
    """Per-kind intrinsic delay, area, and a fanout-load term.

    Gate delay is ``delay[kind] + effort * fanout(output)``; ``effort`` is 0
    by default so path delays match the compressor delay table exactly.
    """

    delay: dict[str, float] = field(default_factory=lambda: {
        "XOR": 1.5, "XNOR": 1.5, "NAND": 1.0, "NOR": 1.0, "AOI21": 1.0,
        "OAI21": 1.0, "AND": 1.0, "INV": 1.0})
    area: dict[str, float] = field(default_factory=lambda: {
        "XOR": 1.0, "XNOR": 1.0, "AOI21": 0.75, "OAI21": 0.75, "NAND": 0.5,
        "NOR": 0.5, "INV": 0.25, "AND": 1.0})
    effort: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GateLibrary":
        lib = cls()
        for k, v in d.get("delay", {}).items():
            _check_kind(k)
            lib.delay[k] = float(v)
        for k, v in d.get("area", {}).items():
            _check_kind(k)
            lib.area[k] = float(v)
        lib.effort = float(d.get("effort", lib.effort))
        return lib


def _check_kind(k):
    if k not in KINDS:
        raise NetlistError(f"unknown gate kind {k!r}")


def evaluate_gate(kind: str, ins: Sequence, mask=1):
    """Bitwise gate function on ints or numpy arrays; ``mask`` is all-ones."""
    if kind == "AND":
        return ins[0] & ins[1]
    if kind == "NAND":
        return (ins[0] & ins[1]) ^ mask
    if kind == "NOR":
        return (ins[0] | ins[1]) ^ mask
    if kind == "XOR":
        return ins[0] ^ ins[1]
    if kind == "XNOR":
        return ins[0] ^ ins[1] ^ mask
    if kind == "AOI21":
        return ((ins[0] & ins[1]) | ins[2]) ^ mask
    if kind == "OAI21":
        return ((ins[0] | ins[1]) & ins[2]) ^ mask
    if kind == "INV":
        return ins[0] ^ mask
    raise NetlistError(f"unknown gate kind {kind!r}")


class GateNetlist:
    def __init__(self, name: str = "top"):
        self.name = name
        self.inputs: dict[str, int] = {}
        self.outputs: dict[str, list[str]] = {}
        self.gates: list[Gate] = []
        self.driver: dict[str, Gate] = {}
        self.meta: dict = {}

    def __repr__(self):
        return f"GateNetlist({self.name!r}, gates={len(self.gates)})"

    def add_input(self, port: str, width: int) -> list[str]:
        if port in self.inputs or port in self.outputs:
            raise NetlistError(f"duplicate port {port!r}")
        self.inputs[port] = width
        return [f"{port}[{i}]" for i in range(width)]

    def set_output(self, port: str, nets: Sequence[str]) -> None:
        if port in self.inputs or port in self.outputs:
            raise NetlistError(f"duplicate port {port!r}")
        self.outputs[port] = list(nets)

    def add_gate(self, kind: str, inputs: Sequence[str], output: str, name: str | None = None) -> str:
        _check_kind(kind)
        if len(inputs) != KINDS[kind]:
            raise NetlistError(f"{kind} takes {KINDS[kind]} inputs, got {len(inputs)}")
        if output in self.driver or output in CONSTS or self.is_input_net(output):
            raise NetlistError(f"net {output!r} already has a driver")
        g = Gate(name or f"g_{output}", kind, tuple(inputs), output)
        self.gates.append(g)
        self.driver[output] = g
        return output

    def is_input_net(self, net: str) -> bool:
        m = re.fullmatch(r"(\w+)\[(\d+)\]", net)
        return bool(m) and m.group(1) in self.inputs and int(m.group(2)) < self.inputs[m.group(1)]

    def input_nets(self) -> list[str]:
        return [f"{p}[{i}]" for p, w in self.inputs.items() for i in range(w)]

    def nets(self) -> set[str]:
        out = set(self.input_nets()) | set(self.driver)
        return out

    def fanout(self) -> Counter:
        fo: Counter = Counter()
        for g in self.gates:
            for n in g.inputs:
                fo[n] += 1
        return fo

    def check(self) -> None:
        """Single driver, known nets, all outputs driven, no cycles."""
        known = self.nets() | set(CONSTS)
        for g in self.gates:
            for n in g.inputs:
                if n not in known:
                    raise NetlistError(f"gate {g.name} reads undriven net {n!r}")
        for port, nets in self.outputs.items():
            for i, n in enumerate(nets):
                if n not in known:
                    raise NetlistError(f"output {port}[{i}] is driven by unknown net {n!r}")
        self.topo_order()

    def topo_order(self) -> list[Gate]:
        ts = TopologicalSorter()
        for g in self.gates:
            ts.add(g.output, *[n for n in g.inputs if n in self.driver])
        try:
            order = list(ts.static_order())
        except CycleError as e:
            raise NetlistError(f"combinational loop through nets {e.args[1]}") from None
        return [self.driver[n] for n in order if n in self.driver]

    def stats(self) -> Counter:
        return Counter(g.kind for g in self.gates)

    # -- JSON ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "name": self.name,
            "inputs": dict(self.inputs),
            "outputs": {k: list(v) for k, v in self.outputs.items()},
            "gates": [{"name": g.name, "kind": g.kind, "inputs": list(g.inputs),
                       "output": g.output} for g in self.gates],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "GateNetlist":
        if d.get("schema") != SCHEMA:
            raise NetlistError(f"unsupported netlist schema {d.get('schema')!r}")
        nl = cls(d["name"])
        for p, w in d["inputs"].items():
            nl.add_input(p, int(w))
        for g in d["gates"]:
            nl.add_gate(g["kind"], g["inputs"], g["output"], g["name"])
        for p, nets in d["outputs"].items():
            nl.set_output(p, nets)
        nl.meta = d.get("meta", {})
        nl.check()
        return nl

    @classmethod
    def from_json(cls, text: str) -> "GateNetlist":
        return cls.from_dict(json.loads(text))


# -- structural comparison ------------------------------------------------------

def _structure_keys(nl: GateNetlist) -> dict[str, tuple]:
    """A name-free key per net: inputs by port position, gates by kind and
    fan-in keys (the symmetric inputs sorted)."""
    keys: dict[str, tuple] = {n: ("in", n) for n in nl.input_nets()}
    keys.update({c: ("const", v) for c, v in CONSTS.items()})
    for g in nl.topo_order():
        ins = [keys[n] for n in g.inputs]
        if g.kind in ("AOI21", "OAI21"):
            ins = sorted(ins[:2]) + [ins[2]]
        elif len(ins) == 2:
            ins = sorted(ins)
        keys[g.output] = (g.kind, tuple(ins))
    return keys


def isomorphic(a: GateNetlist, b: GateNetlist) -> bool:
    """Same ports and the same gate structure up to net and gate names."""
    if a.inputs != b.inputs or {k: len(v) for k, v in a.outputs.items()} != \
            {k: len(v) for k, v in b.outputs.items()}:
        return False
    ka, kb = _structure_keys(a), _structure_keys(b)
    ga = Counter(hash(ka[g.output]) for g in a.gates)
    gb = Counter(hash(kb[g.output]) for g in b.gates)
    if ga != gb:
        return False
    for port in a.outputs:
        if [ka[n] for n in a.outputs[port]] != [kb[n] for n in b.outputs[port]]:
            return False
    return True


# -- Verilog -------------------------------------------------------------------

VERILOG_RESERVED = frozenset("""
always and assign automatic begin buf bufif0 bufif1 case casex casez cell cmos config
deassign default defparam design disable edge else end endcase endconfig endfunction
endgenerate endmodule endprimitive endspecify endtable endtask event for force forever
fork function generate genvar highz0 highz1 if ifnone incdir include initial inout input
instance integer join large liblist library localparam macromodule medium module nand
negedge nmos nor noshowcancelled not notif0 notif1 or output parameter pmos posedge
primitive pull0 pull1 pulldown pullup pulsestyle_onevent pulsestyle_ondetect rcmos real
realtime reg release repeat rnmos rpmos rtran rtranif0 rtranif1 scalared showcancelled
signed small specify specparam strong0 strong1 supply0 supply1 table task time tran
tranif0 tranif1 tri tri0 tri1 triand trior trireg unsigned use uwire vectored wait wand
weak0 weak1 while wire wor xnor xor
""".split())

_PRIM = {"AND": "and", "NAND": "nand", "NOR": "nor", "XOR": "xor", "XNOR": "xnor", "INV": "not"}

_CELLS = """\
module AOI21 (output y, input a, input b, input c);
  assign y = ~((a & b) | c);
endmodule

module OAI21 (output y, input a, input b, input c);
  assign y = ~((a | b) & c);
endmodule
"""

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")


def _legal(name: str, renames: dict[str, str]) -> str:
    if name in renames:
        return renames[name]
    new = name
    if not _IDENT.fullmatch(new):
        new = re.sub(r"[^A-Za-z0-9_$]", "_", new)
        if not re.match(r"[A-Za-z_]", new):
            new = "n_" + new
    while new in VERILOG_RESERVED or new in renames.values() or new in ("AOI21", "OAI21"):
        new += "_r"
    if new != name:
        renames[name] = new
    return new


def emit_verilog(nl: GateNetlist, module_name: str | None = None) -> str:
    """Structural Verilog: primitive gates plus AOI21/OAI21 cell modules.

    Identifiers that clash with Verilog keywords are renamed; the map is
    listed in a header comment.
    """
    renames: dict[str, str] = {}
    module = _legal(module_name or nl.name, renames)
    ports = {p: _legal(p, renames) for p in list(nl.inputs) + list(nl.outputs)}

    def net(n: str) -> str:
        if n in CONSTS:
            return n
        m = re.fullmatch(r"(\w+)\[(\d+)\]", n)
        if m and m.group(1) in nl.inputs:
            return f"{ports[m.group(1)]}[{m.group(2)}]"
        return _legal(n, renames)

    body = []
    wires = [net(g.output) for g in nl.gates]
    for g in nl.gates:
        inst = _legal("u_" + g.name, renames)
        args = ", ".join([net(g.output)] + [net(n) for n in g.inputs])
        if g.kind in _PRIM:
            body.append(f"  {_PRIM[g.kind]} {inst} ({args});")
        else:
            body.append(f"  {g.kind} {inst} ({args});")
    assigns = []
    for p, nets in nl.outputs.items():
        for i, n in enumerate(nets):
            assigns.append(f"  assign {ports[p]}[{i}] = {net(n)};")

    head = ["// structural netlist generated by mulgen", f"// schema {SCHEMA}"]
    if renames:
        head.append("// renamed identifiers:")
        head += [f"//   {k} -> {v}" for k, v in sorted(renames.items())]
    decl = [f"module {module} ("]
    plist = [f"  input [{w - 1}:0] {ports[p]}" for p, w in nl.inputs.items()]
    plist += [f"  output [{len(v) - 1}:0] {ports[p]}" for p, v in nl.outputs.items()]
    decl.append(",\n".join(plist))
    decl.append(");")
    lines = head + [""] + decl
    for k in range(0, len(wires), 8):
        lines.append("  wire " + ", ".join(wires[k:k + 8]) + ";")
    lines += body + assigns + ["endmodule", "", _CELLS]
    return "\n".join(lines)


_GATE_LINE = re.compile(r"^\s*(\w+)\s+(\w+)\s*\(([^)]*)\);\s*$")
_ASSIGN_LINE = re.compile(r"^\s*assign\s+(\w+)\[(\d+)\]\s*=\s*(\S+);\s*$")
_PORT_LINE = re.compile(r"^\s*(input|output)\s*\[(\d+):0\]\s*(\w+),?\s*$")


def read_verilog(text: str) -> GateNetlist:
    """Read back the structural subset written by :func:`emit_verilog`."""
    rev = {v: k for k, v in re.findall(r"^//\s+(\S+) -> (\S+)$", text, re.M)}
    top = text.split("endmodule")[0]
    m = re.search(r"module\s+(\w+)\s*\(", top)
    if not m:
        raise NetlistError("no module header")
    nl = GateNetlist(rev.get(m.group(1), m.group(1)))
    outputs: dict[str, list] = {}
    kinds = {v: k for k, v in _PRIM.items()}
    kinds.update(AOI21="AOI21", OAI21="OAI21")

    def net(n: str) -> str:
        pm = re.fullmatch(r"(\w+)\[(\d+)\]", n)
        if pm:
            return f"{rev.get(pm.group(1), pm.group(1))}[{pm.group(2)}]"
        return rev.get(n, n)

    for lineno, line in enumerate(top.splitlines(), 1):
        if pm := _PORT_LINE.match(line):
            name = rev.get(pm.group(3), pm.group(3))
            if pm.group(1) == "input":
                nl.add_input(name, int(pm.group(2)) + 1)
            else:
                outputs[name] = [None] * (int(pm.group(2)) + 1)
        elif am := _ASSIGN_LINE.match(line):
            outputs[rev.get(am.group(1), am.group(1))][int(am.group(2))] = net(am.group(3))
        elif (gm := _GATE_LINE.match(line)) and gm.group(1) in kinds:
            args = [a.strip() for a in gm.group(3).split(",")]
            inst = rev.get(gm.group(2), gm.group(2))
            nl.add_gate(kinds[gm.group(1)], [net(a) for a in args[1:]], net(args[0]),
                        inst[2:] if inst.startswith("u_") else inst)
    for p, nets in outputs.items():
        if any(n is None for n in nets):
            raise NetlistError(f"output {p} has unassigned bits")
        nl.set_output(p, nets)
    nl.check()
    return nl


# -- reports -------------------------------------------------------------------

@dataclass
class NetlistReport:
    area: float
    delay: float
    profile: dict[str, list[float]]  # output port -> per-bit arrival
    gate_counts: dict[str, int]
    critical_path: list[str]

    def to_dict(self) -> dict:
        return asdict(self)


def arrival_times(nl: GateNetlist, lib: GateLibrary | None = None,
                  input_arrivals: Mapping[str, float] | None = None) -> dict[str, float]:
    lib = lib or GateLibrary()
    fo = nl.fanout() if lib.effort else None
    at = {n: 0.0 for n in nl.input_nets()}
    if input_arrivals:
        at.update(input_arrivals)
    at.update({c: 0.0 for c in CONSTS})
    for g in nl.topo_order():
        load = lib.effort * fo[g.output] if fo is not None else 0.0
        at[g.output] = max(at[n] for n in g.inputs) + lib.delay[g.kind] + load
    return at


def report(nl: GateNetlist, lib: GateLibrary | None = None,
           input_arrivals: Mapping[str, float] | None = None) -> NetlistReport:
    """Gate-count area and longest path by a topological sweep."""
    lib = lib or GateLibrary()
    at = arrival_times(nl, lib, input_arrivals)
    profile = {p: [at[n] for n in nets] for p, nets in nl.outputs.items()}
    delay = max((t for v in profile.values() for t in v), default=0.0)
    area = sum(lib.area[g.kind] for g in nl.gates)
    # walk back along the latest fan-in
    end = None
    for nets in nl.outputs.values():
        for n in nets:
            if end is None or at[n] > at[end]:
                end = n
    path = []
    while end is not None:
        path.append(end)
        g = nl.driver.get(end)
        end = max(g.inputs, key=lambda n: at[n]) if g else None
    return NetlistReport(area, delay, profile, dict(sorted(nl.stats().items())), path[::-1])


# -- elaboration ---------------------------------------------------------------

class _Builder:
    def __init__(self, nl: GateNetlist):
        self.nl = nl
        self.inverted: dict[str, str] = {}

    def gate(self, kind: str, inputs: Sequence[str], out: str) -> str:
        return self.nl.add_gate(kind, inputs, out, name=out)

    def inv(self, net: str) -> str:
        if net in CONSTS:
            return CONST1 if net == CONST0 else CONST0
        if net not in self.inverted:
            self.inverted[net] = self.gate("INV", [net], f"{_plain(net)}_n")
        return self.inverted[net]


def _plain(net: str) -> str:
    return re.sub(r"\[(\d+)\]", r"_\1", net)


def elaborate_ct(nl: GateNetlist, layout: TreeLayout, wiring: WiringPlan,
                 bit_nets: Mapping[str, str]) -> list[list[str]]:
    """Add every compressor; returns the output nets of each column."""
    a = layout.assignment
    b = _Builder(nl)
    nets: dict[tuple[int, int], list[str]] = {}
    for j in range(layout.J):
        nets[(0, j)] = [bit_nets[s.name] for s in layout.sources[(0, j)]]
    for i in range(layout.S):
        made: dict[tuple[str, int, int], str] = {}
        for j in range(layout.J):
            src = nets[(i, j)]
            sink = [src[u] for u in wiring.perms[(i, j)]]
            f, h = a.f[i][j], a.h[i][j]
            for k in range(f):
                x, y, c = sink[3 * k:3 * k + 3]
                base = f"fa_{i}_{j}_{k}"
                xn = b.gate("XNOR", [x, y], f"{base}_xn")
                made[("fa_s", j, k)] = b.gate("XNOR", [xn, c], f"{base}_s")
                nab = b.gate("NAND", [x, y], f"{base}_nab")
                nc = b.gate("INV", [c], f"{base}_nc")
                made[("fa_c", j, k)] = b.gate("OAI21", [xn, nc, nab], f"{base}_co")
            for k in range(h):
                x, y = sink[3 * f + 2 * k:3 * f + 2 * k + 2]
                base = f"ha_{i}_{j}_{k}"
                made[("ha_s", j, k)] = b.gate("XOR", [x, y], f"{base}_s")
                made[("ha_c", j, k)] = b.gate("AND", [x, y], f"{base}_co")
            for k, n in enumerate(sink[3 * f + 2 * h:]):
                made[("pass", j, k)] = n
        for j in range(layout.J):
            nets[(i + 1, j)] = [made[(s.kind, s.column, s.index)]
                                for s in layout.sources[(i + 1, j)]]
    return [nets[(layout.S, j)] for j in range(layout.J)]


def elaborate_cpa(nl: GateNetlist, graph: PrefixGraph, x: Sequence[str], y: Sequence[str],
                  prefix: str = "cpa") -> tuple[list[str], str]:
    """Prefix adder over rows ``x`` and ``y``; returns (sum nets, carry-out net)."""
    n = graph.width
    if len(x) != n or len(y) != n:
        raise NetlistError(f"adder width {n} but rows of {len(x)} and {len(y)} bits")
    b = _Builder(nl)
    G: dict[int, str] = {}
    P: dict[int, str] = {}
    neg: dict[int, bool] = {}
    for i in range(n):
        if y[i] == CONST0 or x[i] == CONST0:
            other = x[i] if y[i] == CONST0 else y[i]
            G[i], P[i] = CONST0, other
        else:
            G[i] = b.gate("AND", [x[i], y[i]], f"{prefix}_g_{i}")
            P[i] = b.gate("XOR", [x[i], y[i]], f"{prefix}_p_{i}")
        neg[i] = False
    live = graph.live()
    for nid in graph.topo():
        node = graph.nodes[nid]
        if node.is_input or nid not in live:
            continue
        t, u = node.tf, node.ntf
        pol = neg[t]
        g_u = G[u] if neg[u] == pol else b.inv(G[u])
        p_t, g_t = P[t], G[t]
        tag = f"{prefix}_{node.msb}_{node.lsb}"
        if not pol:
            G[nid] = b.gate("AOI21", [p_t, g_u, g_t], f"{tag}_gn")
        else:
            G[nid] = b.gate("OAI21", [p_t, g_u, g_t], f"{tag}_g")
        if node.lsb > 0:
            p_u = P[u] if neg[u] == pol else b.inv(P[u])
            P[nid] = b.gate("NOR" if pol else "NAND", [p_t, p_u],
                            f"{tag}_p" if pol else f"{tag}_pn")
        neg[nid] = not pol
    sums = [P[0]]
    for i in range(1, n):
        c = graph.outputs[i - 1]
        kind = "XNOR" if neg[c] else "XOR"
        sums.append(b.gate(kind, [P[i], G[c]], f"{prefix}_s_{i}"))
    last = graph.outputs[n - 1]
    cout = b.inv(G[last]) if neg[last] else G[last]
    return sums, cout


@dataclass
class Design:
    """Every stage of one generated datapath."""

    kind: str  # "mult", "mac", "add"
    width: int
    acc_width: int
    ppm: PartialProductMatrix | None
    assignment: StageAssignment | None
    wiring: WiringPlan | None
    graph: PrefixGraph
    cpa_offset: int  # first column handled by the prefix adder
    netlist: GateNetlist


def cpa_span(columns: Sequence[Sequence[str]]) -> int:
    """First column holding two bits; lower columns need no adder."""
    for j, c in enumerate(columns):
        if len(c) >= 2:
            return j
    return len(columns)


def elaborate_multiplier(ppm: PartialProductMatrix, assignment: StageAssignment,
                         wiring: WiringPlan | None, graph_for, name: str | None = None) -> Design:
    """Full multiplier (or fused MAC) netlist.

    ``graph_for(offset, n_columns)`` supplies the prefix graph for the
    columns from ``offset`` on; it is called after the tree is built so it
    can depend on the tree's output arrival profile.
    """
    kind = "mac" if ppm.is_fused else "mult"
    nl = GateNetlist(name or f"{kind}{ppm.width}")
    a = nl.add_input("a", ppm.width)
    bb = nl.add_input("b", ppm.width)
    bit_nets: dict[str, str] = {}
    if ppm.is_fused:
        c = nl.add_input("c", ppm.acc_width)
    for bit in ppm.bits():
        if bit.kind == "pp":
            _, i, k = bit.name.split("_")
            bit_nets[bit.name] = nl.add_gate("AND", [a[int(i)], bb[int(k)]], bit.name,
                                             name=bit.name)
        else:
            bit_nets[bit.name] = c[bit.column]
    layout = TreeLayout(assignment, ppm)
    wiring = wiring or identity_wiring(layout)
    cols = elaborate_ct(nl, layout, wiring, bit_nets)
    off = cpa_span(cols)
    J = len(cols)
    width_out = ppm.result_width
    out = [CONST0] * width_out
    for j in range(min(off, width_out)):
        out[j] = cols[j][0] if cols[j] else CONST0
    graph = graph_for(off, J - off)
    if J - off > 0:
        x = [cols[j][0] if len(cols[j]) > 0 else CONST0 for j in range(off, J)]
        y = [cols[j][1] if len(cols[j]) > 1 else CONST0 for j in range(off, J)]
        sums, cout = elaborate_cpa(nl, graph, x, y)
        for k, s in enumerate(sums):
            if off + k < width_out:
                out[off + k] = s
        if J < width_out:
            out[J] = cout
    nl.set_output("y", out)
    nl.meta.update(kind=kind, width=ppm.width, acc_width=ppm.acc_width)
    nl.check()
    return Design(kind, ppm.width, ppm.acc_width, ppm, assignment, wiring, graph, off, nl)


def elaborate_ct_only(ppm: PartialProductMatrix, assignment: StageAssignment,
                      wiring: WiringPlan | None = None) -> GateNetlist:
    """Compressor tree alone: matrix bits in (port ``x`` in matrix order),
    the two output rows out (``r0``, ``r1``)."""
    nl = GateNetlist(f"ct{ppm.width}")
    bits = ppm.bits()
    xs = nl.add_input("x", len(bits))
    bit_nets = {bit.name: xs[k] for k, bit in enumerate(bits)}
    layout = TreeLayout(assignment, ppm)
    cols = elaborate_ct(nl, layout, wiring or identity_wiring(layout), bit_nets)
    nl.set_output("r0", [c[0] if c else CONST0 for c in cols])
    nl.set_output("r1", [c[1] if len(c) > 1 else CONST0 for c in cols])
    nl.meta.update(kind="ct", width=ppm.width, acc_width=ppm.acc_width,
                   bits=[b.name for b in bits], columns=[b.column for b in bits])
    nl.check()
    return nl


def elaborate_adder(graph: PrefixGraph, name: str | None = None) -> GateNetlist:
    nl = GateNetlist(name or f"add{graph.width}")
    a = nl.add_input("a", graph.width)
    b = nl.add_input("b", graph.width)
    sums, cout = elaborate_cpa(nl, graph, a, b)
    nl.set_output("s", sums + [cout])
    nl.meta.update(kind="add", width=graph.width)
    nl.check()
    return nl


def role_area(nl: GateNetlist, lib: GateLibrary | None = None) -> dict[str, float]:
    """Area split by the name prefix of each gate (pp, fa, ha, cpa)."""
    lib = lib or GateLibrary()
    out: dict[str, float] = {}
    for g in nl.gates:
        role = g.name.split("_", 1)[0]
        out[role] = out.get(role, 0.0) + lib.area[g.kind]
    return out


def fa_area(lib: GateLibrary | None = None) -> float:
    lib = lib or GateLibrary()
    return 2 * lib.area["XNOR"] + lib.area["NAND"] + lib.area["INV"] + lib.area["OAI21"]


def ha_area(lib: GateLibrary | None = None) -> float:
    lib = lib or GateLibrary()
    return lib.area["XOR"] + lib.area["AND"]
