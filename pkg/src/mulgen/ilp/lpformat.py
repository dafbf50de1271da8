"""CPLEX LP-format writer and reader.

Only the subset this package emits is read back: one linear objective,
linear rows with a single sense, ``Bounds``, ``Generals``, ``Binaries``.
Solution files are Gurobi-style ``.sol`` text: ``name value`` per line,
``#`` comments, and an optional ``# Status: <status>`` line.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

from .model import STATUSES, Model, ModelError, Solution

_SECTIONS = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "maximize": "obj", "maximum": "obj", "max": "obj",
    "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
    "bounds": "bounds", "bound": "bounds",
    "generals": "generals", "general": "generals", "gen": "generals",
    "integers": "generals",
    "binaries": "binaries", "binary": "binaries", "bin": "binaries",
    "end": "end",
}
_TERM = re.compile(r"([+-]?)\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.\[\]]*)")


_CONST = re.compile(r"([+-]?)\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)")
_NAME = re.compile(r"[A-Za-z_][\w.\[\]]*")


class LPParseError(ModelError):
    pass


def _num(x: float) -> str:
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(coeffs: dict[str, float]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for i, (v, c) in enumerate(coeffs.items()):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = v if mag == 1 else f"{_num(mag)} {v}"
        if i == 0:
            parts.append(term if sign == "+" else f"- {term}")
        else:
            parts.append(f"{sign} {term}")
    return " ".join(parts)


def _wrap(text: str, width: int = 200) -> list[str]:
    # LP readers cap line length; break on term boundaries.
    out, line = [], ""
    for tok in text.split():
        if len(line) + len(tok) + 1 > width and line:
            out.append(line)
            line = "   " + tok
        else:
            line = f"{line} {tok}" if line else " " + tok
    if line:
        out.append(line)
    return out


def emit_lp(model: Model) -> str:
    lines = [f"\\ model {model.name}"]
    lines.append("Minimize" if model.objective_sense == "min" else "Maximize")
    obj = _expr(model.objective)
    if model.objective_constant:
        c = model.objective_constant
        obj += f" {'+' if c >= 0 else '-'} {_num(abs(c))}"
    lines += _wrap(f" obj: {obj}")
    lines.append("Subject To")
    for con in model.constraints:
        lhs = _expr(con.coeffs)
        lines += _wrap(f" {con.name}: {lhs} {con.sense if con.sense != '=' else '='} {_num(con.rhs)}")
    lines.append("Bounds")
    generals, binaries = [], []
    for v in model.variables.values():
        # every variable gets a bound line so a reader can restore declaration order
        if v.kind == "binary":
            binaries.append(v.name)
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
            continue
        if v.kind == "integer":
            generals.append(v.name)
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" {v.name} free")
        elif v.lb == v.ub:
            lines.append(f" {v.name} = {_num(v.lb)}")
        else:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    if generals:
        lines.append("Generals")
        lines += _wrap(" " + " ".join(generals))
    if binaries:
        lines.append("Binaries")
        lines += _wrap(" " + " ".join(binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_expr(text: str, lineno: int) -> tuple[dict[str, float], float]:
    coeffs: dict[str, float] = {}
    const = 0.0
    pos = 0
    text = text.strip()
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TERM.match(text, pos)
        if m and m.group(3):
            sign = -1.0 if m.group(1) == "-" else 1.0
            coef = float(m.group(2)) if m.group(2) else 1.0
            name = m.group(3)
            coeffs[name] = coeffs.get(name, 0.0) + sign * coef
            pos = m.end()
            continue
        m = _CONST.match(text, pos)
        if m:
            const += (-1 if m.group(1) == "-" else 1) * float(m.group(2))
            pos = m.end()
            continue
        raise LPParseError(f"line {lineno}: cannot parse expression near {text[pos:]!r}")
    return coeffs, const


def _parse_bound(val: str) -> float:
    v = val.strip().lower()
    if v in ("+inf", "inf", "+infinity", "infinity"):
        return math.inf
    if v in ("-inf", "-infinity"):
        return -math.inf
    return float(v)


def parse_lp(text: str) -> Model:
    """Read an LP document produced by :func:`emit_lp` (or a compatible one)."""
    section = None
    model = Model()
    statements: dict[str, list[tuple[int, str]]] = {
        "obj": [], "rows": [], "bounds": [], "generals": [], "binaries": []}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].rstrip()
        if raw.startswith("\\ model "):
            model.name = raw[len("\\ model "):].strip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "obj":
                model.objective_sense = "min" if key.startswith("min") else "max"
            if section == "end":
                break
            continue
        if section is None:
            raise LPParseError(f"line {lineno}: content before any section: {raw!r}")
        if section != "end":
            if line.startswith("   ") and statements[section]:
                # continuation of a wrapped statement
                prev_no, prev = statements[section][-1]
                statements[section][-1] = (prev_no, prev + " " + line.strip())
            else:
                statements[section].append((lineno, line.strip()))

    def declare(name: str):
        if name not in model.variables:
            model.add_var(name)

    for _, st in statements["bounds"]:
        parts = st.split()
        if len(parts) >= 2:
            name = parts[2] if len(parts) == 5 else parts[0]
            if _NAME.fullmatch(name):
                declare(name)

    obj_coeffs: dict[str, float] = {}
    obj_const = 0.0
    for lineno, st in statements["obj"]:
        if ":" in st:
            st = st.split(":", 1)[1]
        obj_coeffs, obj_const = _parse_expr(st, lineno)
    for name in obj_coeffs:
        declare(name)

    rows = []
    for lineno, st in statements["rows"]:
        name = None
        if ":" in st:
            name, st = st.split(":", 1)
            name = name.strip()
        m = re.match(r"(.*?)(<=|>=|=<|=>|<|>|=)\s*([+-]?\s*[\d.eE+-]+)\s*$", st)
        if not m:
            raise LPParseError(f"line {lineno}: bad constraint {st!r}")
        sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(m.group(2), m.group(2))
        coeffs, const = _parse_expr(m.group(1), lineno)
        for v in coeffs:
            declare(v)
        rows.append((name, coeffs, sense, float(m.group(3).replace(" ", "")) - const))

    bounds = {}
    for lineno, st in statements["bounds"]:
        parts = st.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            bounds[parts[0]] = (-math.inf, math.inf)
        elif len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
            bounds[parts[2]] = (_parse_bound(parts[0]), _parse_bound(parts[4]))
        elif len(parts) == 3 and parts[1] == "=":
            b = _parse_bound(parts[2])
            bounds[parts[0]] = (b, b)
        elif len(parts) == 3 and parts[1] in ("<=", ">="):
            lo, hi = bounds.get(parts[0], (0.0, math.inf))
            b = _parse_bound(parts[2])
            bounds[parts[0]] = (lo, b) if parts[1] == "<=" else (b, hi)
        else:
            raise LPParseError(f"line {lineno}: bad bound {st!r}")
        declare(parts[2] if len(parts) == 5 else parts[0])

    for kind, sect in (("integer", "generals"), ("binary", "binaries")):
        for _, st in statements[sect]:
            for name in st.split():
                declare(name)
                model.variables[name].kind = kind
                if kind == "binary":
                    model.variables[name].ub = 1.0
    for name, (lo, hi) in bounds.items():
        model.variables[name].lb = lo
        model.variables[name].ub = hi

    for name, coeffs, sense, rhs in rows:
        model.add_constraint(coeffs, sense, rhs, name=name)
    model.set_objective(obj_coeffs, model.objective_sense, obj_const)
    return model


def write_lp(model: Model, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(emit_lp(model))
    return path


def read_lp(path: str | Path) -> Model:
    return parse_lp(Path(path).read_text())


class SolutionParseError(ValueError):
    pass


def format_solution(sol: Solution) -> str:
    lines = [f"# Status: {sol.status}"]
    if sol.objective is not None:
        lines.append(f"# Objective value = {sol.objective!r}")
    lines += [f"{k} {v!r}" for k, v in sol.values.items()]
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> Solution:
    status = None
    objective = None
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            low = body.lower()
            if low.startswith("status"):
                status = body.split(":", 1)[1].strip().lower()
                if status not in STATUSES:
                    raise SolutionParseError(f"line {lineno}: unknown status in {raw!r}")
            elif low.startswith("objective value"):
                objective = float(body.split("=", 1)[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"line {lineno}: expected 'name value', got {raw!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise SolutionParseError(f"line {lineno}: bad value in {raw!r}") from None
    if status is None:
        status = "optimal" if values else "infeasible"
    return Solution(status, values, objective)
