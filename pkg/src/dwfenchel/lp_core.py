"""Incremental linear programs backed by the HiGHS dual simplex.

A :class:`LinearProgram` is grown row by row and column by column (cuts in
Fenchel masters, columns in Dantzig-Wolfe masters, vertex rows in separation
problems) and solved to a basic optimal solution.  Dual values follow a single
convention regardless of row sense or objective sense: ``duals[i]`` is the
derivative of the optimal objective with respect to ``rhs[i]``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
DUALITY_TOL = 1e-6

_SENSES = {"<=": "<=", "=": "=", ">=": ">=", "≤": "<=", "≥": ">=", "==": "="}

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": False,
}

# tried in order when HiGHS ends without a verdict (model status "unknown")
_FALLBACKS = (
    ("highs-ds", {"presolve": True}),
    ("highs-ipm", {"presolve": True}),
)


class NumericalFailure(RuntimeError):
    """The simplex could not reach a verdict (iteration limit or numerical trouble)."""


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpSolution:
    status: Status
    primal: np.ndarray
    duals: np.ndarray
    objective: float
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class LinearProgram:
    """A linear program ``min/max c x  s.t.  rows (<=, =, >=) rhs,  lb <= x <= ub``."""

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"objective sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.cost: list[float] = []
        self.row_sense: list[str] = []
        self.rhs: list[float] = []
        # coordinate storage of the constraint matrix
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []

    @property
    def num_variables(self) -> int:
        return len(self.cost)

    @property
    def num_constraints(self) -> int:
        return len(self.rhs)

    def copy(self) -> LinearProgram:
        other = LinearProgram(self.sense)
        for name in ("lower", "upper", "cost", "row_sense", "rhs", "_rows", "_cols", "_vals"):
            setattr(other, name, list(getattr(self, name)))
        return other

    def add_variable(self, lower=0.0, upper=math.inf, cost=0.0, column=None) -> int:
        """Append a variable; ``column`` maps existing constraint ids to coefficients."""
        lower, upper = float(lower), float(upper)
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ValueError(f"invalid bounds [{lower}, {upper}]")
        j = self.num_variables
        for i, a in (column or {}).items():
            if not 0 <= i < self.num_constraints:
                raise IndexError(f"constraint {i} does not exist")
            if a != 0.0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(float(a))
        self.lower.append(lower)
        self.upper.append(upper)
        self.cost.append(float(cost))
        return j

    def add_constraint(self, row, sense: str, rhs: float) -> int:
        """Append a constraint ``sum(row[j] * x_j) sense rhs`` and return its id."""
        try:
            sense = _SENSES[sense]
        except KeyError:
            raise ValueError(f"unknown constraint sense {sense!r}") from None
        i = self.num_constraints
        for j, a in row.items():
            if not 0 <= j < self.num_variables:
                raise IndexError(f"variable {j} does not exist")
            if a != 0.0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(float(a))
        self.row_sense.append(sense)
        self.rhs.append(float(rhs))
        return i

    def set_bounds(self, j: int, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError(f"invalid bounds [{lower}, {upper}]")
        self.lower[j], self.upper[j] = float(lower), float(upper)

    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self._vals, (self._rows, self._cols)),
            shape=(self.num_constraints, self.num_variables),
        )

    def solve(self) -> LpSolution:
        return solve(self)


def solve(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` to a basic optimal solution, or report infeasibility/unboundedness."""
    n, m = lp.num_variables, lp.num_constraints
    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * np.asarray(lp.cost, dtype=float)
    rhs = np.asarray(lp.rhs, dtype=float)
    senses = np.asarray(lp.row_sense, dtype=object)

    if n == 0:
        ok = all(
            (s == "<=" and 0.0 <= b + FEAS_TOL)
            or (s == ">=" and 0.0 >= b - FEAS_TOL)
            or (s == "=" and abs(b) <= FEAS_TOL)
            for s, b in zip(lp.row_sense, lp.rhs)
        )
        status = Status.OPTIMAL if ok else Status.INFEASIBLE
        return LpSolution(status, np.zeros(0), np.zeros(m), 0.0 if ok else math.nan, np.zeros(0))

    A = lp.matrix()
    eq = np.flatnonzero(senses == "=")
    le = np.flatnonzero(senses == "<=")
    ge = np.flatnonzero(senses == ">=")
    ub_rows = np.concatenate([le, ge])
    flip = np.concatenate([np.ones(len(le)), -np.ones(len(ge))])

    kwargs = {}
    if len(ub_rows):
        kwargs["A_ub"] = sparse.diags(flip) @ A[ub_rows]
        kwargs["b_ub"] = flip * rhs[ub_rows]
    if len(eq):
        kwargs["A_eq"] = A[eq]
        kwargs["b_eq"] = rhs[eq]
    bounds = [
        (None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    res = linprog(c, bounds=bounds, method="highs-ds", options=_HIGHS_OPTIONS, **kwargs)
    for method, extra in _FALLBACKS:
        if res.status != 4:
            break
        log.warning("HiGHS returned no verdict (%s); retrying with %s %s", res.message, method, extra)
        res = linprog(c, bounds=bounds, method=method, options={**_HIGHS_OPTIONS, **extra}, **kwargs)

    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, np.full(n, math.nan), np.full(m, math.nan), math.nan)
    if res.status == 3:
        obj = -math.inf if lp.sense == "min" else math.inf
        return LpSolution(Status.UNBOUNDED, np.full(n, math.nan), np.full(m, math.nan), obj)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS status {res.status}: {res.message}")

    duals = np.zeros(m)
    if len(ub_rows):
        duals[ub_rows] = flip * res.ineqlin.marginals
    if len(eq):
        duals[eq] = res.eqlin.marginals
    duals *= sign
    x = np.asarray(res.x, dtype=float)
    reduced = np.asarray(lp.cost, dtype=float) - A.T @ duals
    return LpSolution(Status.OPTIMAL, x, duals, float(sign * res.fun), reduced)


def add_constraint(lp: LinearProgram, row, sense: str, rhs: float) -> int:
    return lp.add_constraint(row, sense, rhs)


def add_variable(lp: LinearProgram, bounds=(0.0, math.inf), cost=0.0, column=None) -> int:
    return lp.add_variable(bounds[0], bounds[1], cost, column)


def dual_objective(lp: LinearProgram, sol: LpSolution) -> float:
    """Dual objective of an optimal solution: ``rhs . duals`` plus active bound terms."""
    value = float(np.dot(lp.rhs, sol.duals)) if lp.num_constraints else 0.0
    for j, r in enumerate(sol.reduced_costs):
        if abs(r) <= 1e-12:
            continue
        # a nonzero reduced cost prices the bound the variable sits on
        bound = lp.lower[j] if (r > 0) == (lp.sense == "min") else lp.upper[j]
        if math.isinf(bound):
            return -math.inf if lp.sense == "min" else math.inf
        value += r * bound
    return value
