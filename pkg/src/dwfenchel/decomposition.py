"""Dantzig-Wolfe, Fenchel and hybrid DW-Fenchel loops over per-arc polyhedra.

A :class:`DecomposableProblem` is a minimization LP (the constraints kept in
the master) plus blocks: each block is one arc polyhedron whose coordinates
``(f_1..f_K, o)`` are linear expressions of the master variables.  The
Dantzig-Wolfe master convexifies known block vertices (inner approximation,
upper bound); the Fenchel master adds valid cuts (outer approximation, lower
bound).  The hybrid runs both and separates the outer point toward the inner
one with the directional normalization.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .iterative_separation import directional_separate_iterative
from .lp_core import LinearProgram, NumericalFailure
from .oracle import BlockData, BlockVertex, DualWeights, capacity_oracle, enumerate_vertices
from .separation import AlreadyInside, Cut, Directional, NaturalUfp, separate

log = logging.getLogger(__name__)

TOLERANCE = 1e-3
MOMENTUM_ALPHA = 0.8
VIOLATION_TOL = 1e-6
REDUCED_COST_TOL = 1e-9
SUPPORT_TOL = 1e-9


class NoImprovement(Exception):
    """Pricing found no column with a negative reduced cost."""

    def __init__(self, vertex: BlockVertex):
        super().__init__("no improving column")
        self.vertex = vertex


class TimeLimit(Exception):
    pass


@dataclass
class BlockLink:
    """One arc polyhedron and the master expressions of its coordinates."""

    block: BlockData
    f_exprs: list[dict[int, float]]
    o_expr: dict[int, float]

    def __post_init__(self):
        if len(self.f_exprs) != len(self.block):
            raise ValueError("one expression per commodity of the block is required")

    def point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        f = [sum(a * x[j] for j, a in e.items()) for e in self.f_exprs]
        o = sum(a * x[j] for j, a in self.o_expr.items())
        return np.array(f + [o])

    def cut_row(self, cut: Cut) -> dict[int, float]:
        row: dict[int, float] = {}
        for coef, expr in zip(cut.coefs, self.f_exprs):
            for j, a in expr.items():
                row[j] = row.get(j, 0.0) + coef * a
        for j, a in self.o_expr.items():
            row[j] = row.get(j, 0.0) + cut.overflow_coef * a
        return row

    def capacity_cut(self) -> Cut:
        """The block's own capacity inequality ``D.f - o <= c``."""
        b = self.block
        return Cut(np.asarray(b.demands, dtype=float), -1.0, float(b.capacity))


@dataclass
class DecomposableProblem:
    """``min c x`` over ``base`` with every block point in its arc polyhedron.

    ``seed`` is an integral point of the base LP; the block patterns it induces
    make the first restricted Dantzig-Wolfe master feasible.
    """

    base: LinearProgram
    blocks: list[BlockLink]
    seed: np.ndarray | None = None

    def __post_init__(self):
        if self.base.sense != "min":
            raise ValueError("decomposable problems are minimizations")

    def seed_vertices(self) -> list[list[BlockVertex]]:
        out = []
        for link in self.blocks:
            b = link.block
            vs = [b.vertex([0] * len(b)), b.vertex([1] * len(b))]
            if self.seed is not None:
                f = link.point(self.seed)[:-1]
                vs.append(b.vertex(np.rint(f).astype(int)))
            out.append(vs)
        return out


# trace ----------------------------------------------------------------------


@dataclass
class TraceRecord:
    time_s: float
    iteration: int
    lower_bound: float
    upper_bound: float
    oracle_calls: int
    method: str


@dataclass
class BoundTrace:
    """Best-so-far bounds at the end of each round of one run."""

    method: str
    records: list[TraceRecord] = field(default_factory=list)
    status: str = "running"
    cuts: list[tuple[int, Cut]] = field(default_factory=list)
    raw_lower: list[float] = field(default_factory=list)
    raw_upper: list[float] = field(default_factory=list)

    @property
    def lower_bound(self) -> float:
        return self.records[-1].lower_bound if self.records else -math.inf

    @property
    def upper_bound(self) -> float:
        return self.records[-1].upper_bound if self.records else math.inf

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound

    @property
    def final_value(self) -> float:
        lo, hi = self.lower_bound, self.upper_bound
        if math.isfinite(lo) and math.isfinite(hi):
            return 0.5 * (lo + hi)
        return lo if math.isfinite(lo) else hi

    def record(self, start, iteration, lower, upper, calls):
        self.raw_lower.append(lower)
        self.raw_upper.append(upper)
        lo = max(lower, self.lower_bound)
        hi = min(upper, self.upper_bound)
        self.records.append(TraceRecord(time.perf_counter() - start, iteration, lo, hi, calls, self.method))

    def monotone(self) -> bool:
        lows = [r.lower_bound for r in self.records]
        highs = [r.upper_bound for r in self.records]
        return all(a <= b for a, b in zip(lows, lows[1:])) and all(a >= b for a, b in zip(highs, highs[1:]))


@dataclass
class DecompositionConfig:
    tol: float = TOLERANCE
    alpha: float = MOMENTUM_ALPHA
    stabilization: str = "none"
    subproblem: str = "direct"
    time_limit: float = math.inf
    max_iterations: int = 10_000
    violation_tol: float = VIOLATION_TOL
    reduced_cost_tol: float = REDUCED_COST_TOL

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.stabilization not in ("none", "momentum"):
            raise ValueError(f"unknown stabilization {self.stabilization!r}")
        if self.subproblem not in ("direct", "iterative"):
            raise ValueError(f"unknown subproblem {self.subproblem!r}")


# masters --------------------------------------------------------------------


@dataclass
class MasterDuals:
    """Duals of a Dantzig-Wolfe master (derivative of the optimum w.r.t. each rhs)."""

    base: np.ndarray
    links: list[np.ndarray]  # per block: f-row duals then the overflow-row dual
    convexity: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.base, *self.links, self.convexity])

    def like(self, vec) -> MasterDuals:
        vec = np.asarray(vec, dtype=float)
        i = len(self.base)
        base = vec[:i]
        links = []
        for pi in self.links:
            links.append(vec[i:i + len(pi)])
            i += len(pi)
        return MasterDuals(base, links, vec[i:i + len(self.convexity)])

    def weights(self, b: int) -> DualWeights:
        pi = self.links[b]
        return DualWeights(tuple(-pi[:-1]), max(0.0, float(pi[-1])))


def smooth_duals(previous, fresh, alpha: float):
    """Momentum smoothing ``alpha * previous + (1 - alpha) * fresh``."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    return alpha * np.asarray(previous, dtype=float) + (1 - alpha) * np.asarray(fresh, dtype=float)


class DWMaster:
    """Restricted master over the convex hulls of the known block vertices."""

    def __init__(self, problem: DecomposableProblem, vertices=None):
        self.problem = problem
        self.lp = problem.base.copy()
        self.n_base_rows = self.lp.num_constraints
        self.n_vars = self.lp.num_variables
        self.link_rows: list[list[int]] = []
        self.convexity_rows: list[int] = []
        for link in problem.blocks:
            rows = [self.lp.add_constraint(e, "=", 0.0) for e in link.f_exprs]
            rows.append(self.lp.add_constraint(link.o_expr, ">=", 0.0))
            self.link_rows.append(rows)
            self.convexity_rows.append(self.lp.add_constraint({}, "=", 1.0))
        self.columns: list[dict[tuple, int]] = [{} for _ in problem.blocks]
        for b, vs in enumerate(vertices if vertices is not None else problem.seed_vertices()):
            for v in vs:
                self.add_vertex(b, v)
        self.solution = None

    def add_vertex(self, b: int, v: BlockVertex) -> bool:
        if v.pattern in self.columns[b]:
            return False
        rows = self.link_rows[b]
        column = {rows[k]: -1.0 for k, on in enumerate(v.pattern) if on}
        if v.overflow:
            column[rows[-1]] = -v.overflow
        column[self.convexity_rows[b]] = 1.0
        self.columns[b][v.pattern] = self.lp.add_variable(0.0, math.inf, 0.0, column)
        return True

    @property
    def num_columns(self) -> int:
        return sum(len(c) for c in self.columns)

    def solve(self):
        sol = self.lp.solve()
        if not sol.optimal:
            raise NumericalFailure(f"Dantzig-Wolfe master {sol.status.value}")
        self.solution = sol
        return sol

    @property
    def x(self) -> np.ndarray:
        return self.solution.primal[: self.n_vars]

    @property
    def objective(self) -> float:
        return self.solution.objective

    def duals(self) -> MasterDuals:
        d = self.solution.duals
        base = d[: self.n_base_rows].copy()
        # clip sign noise so the Lagrangian bound stays valid
        for i, s in enumerate(self.lp.row_sense[: self.n_base_rows]):
            if s == "<=":
                base[i] = min(base[i], 0.0)
            elif s == ">=":
                base[i] = max(base[i], 0.0)
        links = []
        for rows in self.link_rows:
            pi = d[rows].copy()
            pi[-1] = max(pi[-1], 0.0)
            links.append(pi)
        return MasterDuals(base, links, d[self.convexity_rows].copy())

    def support(self, b: int, tol: float = SUPPORT_TOL) -> list[BlockVertex]:
        """Vertices of block ``b`` carrying weight in the current solution."""
        block = self.problem.blocks[b].block
        return [block.vertex(p) for p, j in self.columns[b].items() if self.solution.primal[j] > tol]

    def lagrangian_bound(self, duals: MasterDuals, values) -> float:
        return lagrangian_bound(self.problem, duals, values)


def lagrangian_bound(problem: DecomposableProblem, duals: MasterDuals, values) -> float:
    """Lower bound ``b.u + sum_j min_box r_j x_j - sum_b values[b]``.

    ``values[b]`` is the oracle optimum of block ``b`` under the pricing weights
    of ``duals`` (the maximum of ``-pi_f.f - pi_o.o``), and ``r`` the reduced
    costs of the master variables once every row is priced out.
    """
    lp = problem.base
    r = np.asarray(lp.cost, dtype=float).copy()
    if lp.num_constraints:
        r -= lp.matrix().T @ duals.base
    for link, pi in zip(problem.blocks, duals.links):
        for coef, expr in zip(pi[:-1], link.f_exprs):
            for j, a in expr.items():
                r[j] -= coef * a
        for j, a in link.o_expr.items():
            r[j] -= pi[-1] * a
    bound = float(np.dot(lp.rhs, duals.base)) if lp.num_constraints else 0.0
    for j, rj in enumerate(r):
        if abs(rj) <= 1e-12:
            continue
        end = lp.lower[j] if rj > 0 else lp.upper[j]
        if math.isinf(end):
            return -math.inf
        bound += rj * end
    return bound - float(sum(values))


def price_block(block: BlockData, weights: DualWeights, convexity: float, tol: float = REDUCED_COST_TOL) -> BlockVertex:
    """Oracle column for one block; raises :class:`NoImprovement` when its reduced cost is not negative."""
    v = capacity_oracle(block, weights)
    if v.value + convexity <= tol * max(1.0, abs(convexity)):
        raise NoImprovement(v)
    return v


class FenchelMaster:
    """Base LP plus valid cuts on the block points, starting from the capacity inequalities."""

    def __init__(self, problem: DecomposableProblem):
        self.problem = problem
        self.lp = problem.base.copy()
        self.n_vars = self.lp.num_variables
        self.cuts: list[list[Cut]] = [[] for _ in problem.blocks]
        for b, link in enumerate(problem.blocks):
            self.add_cut(b, link.capacity_cut())
        self.solution = None

    def add_cut(self, b: int, cut: Cut) -> int:
        link = self.problem.blocks[b]
        self.cuts[b].append(cut)
        return self.lp.add_constraint(link.cut_row(cut), "<=", cut.rhs)

    def solve(self):
        sol = self.lp.solve()
        if not sol.optimal:
            raise NumericalFailure(f"Fenchel master {sol.status.value}")
        self.solution = sol
        return sol

    @property
    def x(self) -> np.ndarray:
        return self.solution.primal[: self.n_vars]

    @property
    def objective(self) -> float:
        return self.solution.objective


# loops ----------------------------------------------------------------------


class _Run:
    """Shared bookkeeping: clock, oracle counter and trace."""

    def __init__(self, method: str, config: DecompositionConfig):
        self.config = config
        self.trace = BoundTrace(method)
        self.start = time.perf_counter()
        self.calls = 0
        self.iteration = 0

    def record(self, lower, upper):
        self.trace.record(self.start, self.iteration, lower, upper, self.calls)

    def converged(self) -> bool:
        return self.trace.gap <= self.config.tol

    def out_of_time(self) -> bool:
        return time.perf_counter() - self.start > self.config.time_limit

    def finish(self, status: str) -> BoundTrace:
        self.trace.status = status
        log.info("%s: %s after %d rounds, bounds [%.6g, %.6g]", self.trace.method, status,
                 self.iteration, self.trace.lower_bound, self.trace.upper_bound)
        return self.trace


def _price_all(master: DWMaster, duals: MasterDuals, tol: float):
    """Price every block at ``duals``; return (oracle values, improving vertices per block)."""
    values, found = [], []
    for b, link in enumerate(master.problem.blocks):
        v = capacity_oracle(link.block, duals.weights(b))
        values.append(v.value)
        found.append(v)
    return values, found


def _reduced_cost(duals: MasterDuals, b: int, v: BlockVertex) -> float:
    pi = duals.links[b]
    return float(np.dot(pi[:-1], v.pattern)) + pi[-1] * v.overflow - duals.convexity[b]


def run_dantzig_wolfe(problem: DecomposableProblem, config: DecompositionConfig | None = None) -> BoundTrace:
    """Column generation; ``config.stabilization == 'momentum'`` smooths the pricing duals."""
    config = config or DecompositionConfig()
    method = "dw-momentum" if config.stabilization == "momentum" else "dw"
    run = _Run(method, config)
    master = DWMaster(problem)
    smoothed = None

    while run.iteration < config.max_iterations:
        if run.out_of_time():
            return run.finish("time_limit")
        run.iteration += 1
        master.solve()
        fresh = master.duals()
        upper = master.objective

        added = 0
        lower = -math.inf
        if config.stabilization == "momentum":
            vec = fresh.as_vector() if smoothed is None else smooth_duals(smoothed, fresh.as_vector(), config.alpha)
            smoothed = vec
            center = fresh.like(vec)
            values, found = _price_all(master, center, config.reduced_cost_tol)
            run.calls += len(values)
            lower = max(lower, lagrangian_bound(problem, center, values))
            for b, v in enumerate(found):
                if _reduced_cost(fresh, b, v) < -config.reduced_cost_tol and master.add_vertex(b, v):
                    added += 1
        if not added:
            # plain pricing, or a mispriced smoothed round
            values, found = _price_all(master, fresh, config.reduced_cost_tol)
            run.calls += len(values)
            lower = max(lower, lagrangian_bound(problem, fresh, values))
            for b, v in enumerate(found):
                if _reduced_cost(fresh, b, v) < -config.reduced_cost_tol and master.add_vertex(b, v):
                    added += 1
        run.record(lower, upper)
        if run.converged():
            return run.finish("converged")
        if not added:
            return run.finish("no_column")
    return run.finish("iteration_limit")


def _add_result(res, b, fenchel: FenchelMaster | None, dw: DWMaster, run: _Run, violation_tol: float):
    """Feed one separation outcome to the masters; return (cuts added, vertices added)."""
    run.calls += res.oracle_calls
    if isinstance(res, AlreadyInside):
        return 0, sum(dw.add_vertex(b, v) for v in res.support)
    vertices = sum(dw.add_vertex(b, v) for v in res.tight_vertices)
    if res.violation > violation_tol and fenchel is not None:
        fenchel.add_cut(b, res.cut)
        run.trace.cuts.append((b, res.cut))
        return 1, vertices
    return 0, vertices


def run_fenchel(problem: DecomposableProblem, config: DecompositionConfig | None = None) -> BoundTrace:
    """Cutting planes with the natural normalization; generated vertices feed a side DW master."""
    config = config or DecompositionConfig()
    run = _Run("fenchel", config)
    fenchel = FenchelMaster(problem)
    dw = DWMaster(problem)
    norm = NaturalUfp()

    while run.iteration < config.max_iterations:
        if run.out_of_time():
            return run.finish("time_limit")
        run.iteration += 1
        fenchel.solve()
        dw.solve()
        run.record(fenchel.objective, dw.objective)
        if run.converged():
            return run.finish("converged")

        x = fenchel.x
        cuts = 0
        for b, link in enumerate(problem.blocks):
            res = separate(link.point(x), link.block, norm, config.violation_tol)
            c, _ = _add_result(res, b, fenchel, dw, run, config.violation_tol)
            cuts += c
        if not cuts:
            # the outer point lies in every polyhedron; its decomposition closes the gap
            dw.solve()
            run.record(fenchel.objective, dw.objective)
            return run.finish("converged" if run.converged() else "no_cut")
    return run.finish("iteration_limit")


def run_dw_fenchel(problem: DecomposableProblem, config: DecompositionConfig | None = None) -> BoundTrace:
    """Hybrid loop: separate the Fenchel point toward the DW point in every block."""
    config = config or DecompositionConfig()
    method = "dwf-iterative" if config.subproblem == "iterative" else "dwf"
    run = _Run(method, config)
    fenchel = FenchelMaster(problem)
    dw = DWMaster(problem)

    while run.iteration < config.max_iterations:
        if run.out_of_time():
            return run.finish("time_limit")
        run.iteration += 1
        fenchel.solve()
        dw.solve()
        duals = dw.duals()
        lower, upper = fenchel.objective, dw.objective
        if upper - lower <= config.tol:
            run.record(lower, upper)
            return run.finish("converged")

        x_out, x_in = fenchel.x, dw.x
        cuts = vertices = 0
        for b, link in enumerate(problem.blocks):
            outer, anchor = link.point(x_out), link.point(x_in)
            if np.max(np.abs(outer - anchor)) <= 1e-9:
                continue
            if config.subproblem == "iterative":
                res = directional_separate_iterative(outer, anchor, link.block,
                                                     membership_tol=config.violation_tol)
            else:
                res = separate(outer, link.block, Directional(anchor), config.violation_tol,
                               seeds=dw.support(b))
            c, v = _add_result(res, b, fenchel, dw, run, config.violation_tol)
            cuts += c
            vertices += v

        # one classical pricing round on the duals already at hand
        values, found = _price_all(dw, duals, config.reduced_cost_tol)
        run.calls += len(values)
        lower = max(lower, lagrangian_bound(problem, duals, values))
        for b, v in enumerate(found):
            if _reduced_cost(duals, b, v) < -config.reduced_cost_tol and dw.add_vertex(b, v):
                vertices += 1
        run.record(lower, upper)
        if run.converged():
            return run.finish("converged")
        if not cuts and not vertices:
            return run.finish("stalled")
    return run.finish("iteration_limit")


def solve_exact(problem: DecomposableProblem) -> float:
    """Strengthened relaxation value from a master holding every vertex of every block."""
    master = DWMaster(problem, [enumerate_vertices(link.block) for link in problem.blocks])
    master.solve()
    return master.objective


def run_exact(problem: DecomposableProblem) -> BoundTrace:
    run = _Run("exact-enum", DecompositionConfig())
    run.iteration = 1
    value = solve_exact(problem)
    run.calls = sum(2 ** len(link.block) for link in problem.blocks)
    run.record(value, value)
    return run.finish("converged")


def solve_linear_relaxation(problem: DecomposableProblem) -> float:
    """Value of the plain relaxation: base LP plus each block's capacity inequality."""
    master = FenchelMaster(problem)
    master.solve()
    return master.objective


METHODS = {
    "dw": lambda p, c: run_dantzig_wolfe(p, _with(c, stabilization="none")),
    "dw-momentum": lambda p, c: run_dantzig_wolfe(p, _with(c, stabilization="momentum")),
    "fenchel": lambda p, c: run_fenchel(p, c),
    "dwf": lambda p, c: run_dw_fenchel(p, _with(c, subproblem="direct")),
    "dwf-iterative": lambda p, c: run_dw_fenchel(p, _with(c, subproblem="iterative")),
    "exact-enum": lambda p, c: run_exact(p),
}


def _with(config: DecompositionConfig | None, **changes) -> DecompositionConfig:
    config = config or DecompositionConfig()
    return DecompositionConfig(**{**config.__dict__, **changes})


def run_method(name: str, problem: DecomposableProblem, config: DecompositionConfig | None = None) -> BoundTrace:
    try:
        runner = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
    return runner(problem, config)
