from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import sparse

KINDS = ("binary", "integer", "continuous")
SENSES = ("<=", "=", ">=")
STATUSES = ("optimal", "feasible", "infeasible", "timeout")

FEAS_TOL = 1e-6


class ModelError(ValueError):
    pass


@dataclass
class Variable:
    name: str
    kind: str = "continuous"
    lb: float = 0.0
    ub: float = math.inf

    @property
    def is_integral(self) -> bool:
        return self.kind != "continuous"


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float

    def activity(self, values: Mapping[str, float]) -> float:
        return sum(c * values[v] for v, c in self.coeffs.items())

    def violation(self, values: Mapping[str, float]) -> float:
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass
class Solution:
    status: str
    values: dict[str, float] = field(default_factory=dict)
    objective: float | None = None
    bound: float | None = None
    nodes: int = 0
    message: str = ""

    @property
    def has_values(self) -> bool:
        return self.status in ("optimal", "feasible")

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def int_value(self, name: str) -> int:
        return int(round(self.values[name]))


class Model:
    """A linear model with named variables and constraints.

    ``meta`` is free-form bookkeeping for the code that built the model
    (decoders use it to map variables back to structure).
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: dict[str, Variable] = {}
        self.constraints: list[Constraint] = []
        self._cnames: set[str] = set()
        self.objective: dict[str, float] = {}
        self.objective_sense = "min"
        self.objective_constant = 0.0
        self.meta: dict = {}

    def __repr__(self):
        return (f"Model({self.name!r}, vars={len(self.variables)}, "
                f"constraints={len(self.constraints)})")

    # -- building ---------------------------------------------------------
    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0,
                ub: float | None = None) -> str:
        if name in self.variables:
            raise ModelError(f"duplicate variable {name!r}")
        if kind not in KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if kind == "binary":
            lb, ub = max(0.0, lb), 1.0 if ub is None else min(1.0, ub)
        ub = math.inf if ub is None else float(ub)
        self.variables[name] = Variable(name, kind, float(lb), ub)
        return name

    def add_constraint(self, coeffs: Mapping[str, float], sense: str, rhs: float,
                       name: str | None = None) -> Constraint:
        if sense == "==":
            sense = "="
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        for v in coeffs:
            if v not in self.variables:
                raise ModelError(f"constraint references unknown variable {v!r}")
        if name is None:
            name = f"c{len(self.constraints)}"
        if name in self._cnames:
            raise ModelError(f"duplicate constraint {name!r}")
        self._cnames.add(name)
        merged = {v: float(c) for v, c in coeffs.items() if c != 0}
        con = Constraint(name, merged, sense, float(rhs))
        self.constraints.append(con)
        return con

    def set_objective(self, coeffs: Mapping[str, float], sense: str = "min",
                      constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ModelError(f"objective sense must be 'min' or 'max', got {sense!r}")
        for v in coeffs:
            if v not in self.variables:
                raise ModelError(f"objective references unknown variable {v!r}")
        self.objective = {v: float(c) for v, c in coeffs.items() if c != 0}
        self.objective_sense = sense
        self.objective_constant = float(constant)

    # -- queries ----------------------------------------------------------
    @property
    def var_names(self) -> list[str]:
        return list(self.variables)

    def count(self, kind: str) -> int:
        return sum(1 for v in self.variables.values() if v.kind == kind)

    def objective_value(self, values: Mapping[str, float]) -> float:
        return self.objective_constant + sum(
            c * values[v] for v, c in self.objective.items())

    def max_violation(self, values: Mapping[str, float], integrality: bool = True) -> float:
        worst = 0.0
        for var in self.variables.values():
            x = values[var.name]
            worst = max(worst, var.lb - x, x - var.ub)
            if integrality and var.is_integral:
                worst = max(worst, abs(x - round(x)))
        for con in self.constraints:
            worst = max(worst, con.violation(values))
        return worst

    def check(self, values: Mapping[str, float], tol: float = FEAS_TOL) -> list[str]:
        """Names of bounds/constraints violated by ``values`` beyond ``tol``."""
        bad = []
        for var in self.variables.values():
            x = values.get(var.name)
            if x is None:
                bad.append(f"{var.name}: missing")
                continue
            if x < var.lb - tol or x > var.ub + tol:
                bad.append(f"{var.name}: bound")
            elif var.is_integral and abs(x - round(x)) > tol:
                bad.append(f"{var.name}: integrality")
        for con in self.constraints:
            if all(v in values for v in con.coeffs) and con.violation(values) > tol:
                bad.append(con.name)
        return bad

    def to_arrays(self) -> "ModelArrays":
        return ModelArrays.from_model(self)


@dataclass
class ModelArrays:
    """Dense-index form of a model: minimize ``c @ x`` subject to rows."""

    names: list[str]
    c: np.ndarray
    c0: float
    sign: float  # +1 for min, -1 for max (c already negated for max)
    A_ub: sparse.csr_matrix | None
    b_ub: np.ndarray | None
    A_eq: sparse.csr_matrix | None
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray
    integral: np.ndarray

    @classmethod
    def from_model(cls, model: Model) -> "ModelArrays":
        names = model.var_names
        index = {n: i for i, n in enumerate(names)}
        n = len(names)
        sign = 1.0 if model.objective_sense == "min" else -1.0
        c = np.zeros(n)
        for v, coef in model.objective.items():
            c[index[v]] = sign * coef
        ub_rows, ub_cols, ub_vals, b_ub = [], [], [], []
        eq_rows, eq_cols, eq_vals, b_eq = [], [], [], []
        for con in model.constraints:
            if con.sense == "=":
                r = len(b_eq)
                for v, coef in con.coeffs.items():
                    eq_rows.append(r)
                    eq_cols.append(index[v])
                    eq_vals.append(coef)
                b_eq.append(con.rhs)
            else:
                s = 1.0 if con.sense == "<=" else -1.0
                r = len(b_ub)
                for v, coef in con.coeffs.items():
                    ub_rows.append(r)
                    ub_cols.append(index[v])
                    ub_vals.append(s * coef)
                b_ub.append(s * con.rhs)
        A_ub = (sparse.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(len(b_ub), n))
                if b_ub else None)
        A_eq = (sparse.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(b_eq), n))
                if b_eq else None)
        variables = model.variables.values()
        return cls(
            names=names,
            c=c,
            c0=model.objective_constant,
            sign=sign,
            A_ub=A_ub,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=A_eq,
            b_eq=np.array(b_eq) if b_eq else None,
            lb=np.array([v.lb for v in variables], dtype=float),
            ub=np.array([v.ub for v in variables], dtype=float),
            integral=np.array([v.is_integral for v in variables], dtype=bool),
        )
