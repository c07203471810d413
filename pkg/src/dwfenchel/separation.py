"""Fenchel separation over one arc polyhedron.

The separation LP has the cut coefficients ``(pi, pi_o, pi_0)`` as variables,
maximizes the violation ``pi.f + pi_o*o - pi_0`` at the separated point and
keeps one row ``pi.f_g + pi_o*o_g <= pi_0`` per known vertex ``g``.  Rows are
generated lazily: the oracle is asked for the vertex most violating the
current cut until none does.  A normalization bounds the otherwise conic
feasible set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lp_core import LinearProgram, NumericalFailure, Status
from .oracle import BlockData, BlockVertex, DualWeights, capacity_oracle

log = logging.getLogger(__name__)

FIX_TOL = 1e-6
TIGHT_TOL = 1e-7
ADD_TOL = 1e-9
MAX_ROUNDS = 10_000
BOX = 1e4


class UnboundedSeparation(RuntimeError):
    """The normalization does not bound the separation problem."""


class LiftingFailure(RuntimeError):
    """A lifted cut failed the final oracle validation."""


@dataclass
class Cut:
    """Valid inequality ``coefs.f + overflow_coef*o <= rhs`` for one arc polyhedron."""

    coefs: np.ndarray
    overflow_coef: float
    rhs: float

    def __post_init__(self):
        self.coefs = np.asarray(self.coefs, dtype=float)
        self.overflow_coef = float(self.overflow_coef)
        self.rhs = float(self.rhs)

    @property
    def normal(self) -> np.ndarray:
        return np.append(self.coefs, self.overflow_coef)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.normal))))

    def lhs(self, point) -> float:
        return float(np.dot(self.normal, point))

    def violation(self, point) -> float:
        return self.lhs(point) - self.rhs

    def weights(self) -> DualWeights:
        return DualWeights(tuple(self.coefs), -self.overflow_coef)

    def oracle_gap(self, block: BlockData) -> float:
        """``max over the polyhedron of lhs`` minus ``rhs`` (<= 0 for a valid cut)."""
        return capacity_oracle(block, self.weights()).value - self.rhs


@dataclass
class SeparationResult:
    cut: Cut
    violation: float
    tight_vertices: list[BlockVertex]
    oracle_calls: int
    boundary_t: float | None = None
    steps: list[float] = field(default_factory=list)


@dataclass
class AlreadyInside:
    """The point lies in the polyhedron; ``support`` holds vertices decomposing it."""

    support: list[BlockVertex]
    weights: list[float]
    oracle_calls: int
    violation: float = 0.0
    boundary_t: float | None = None
    steps: list[float] = field(default_factory=list)


# normalizations ---------------------------------------------------------------


class Normalization:
    reducible = False

    def apply(self, lp: LinearProgram, K: int, point: np.ndarray) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class NormL1(Normalization):
    """``|pi|_1 + |pi_o| <= 1`` through auxiliary absolute-value variables."""

    def apply(self, lp, K, point):
        absv = []
        for j in range(K + 1):
            s = lp.add_variable(0.0, math.inf)
            lp.add_constraint({s: 1.0, j: -1.0}, ">=", 0.0)
            lp.add_constraint({s: 1.0, j: 1.0}, ">=", 0.0)
            absv.append(s)
        lp.add_constraint({s: 1.0 for s in absv}, "<=", 1.0)


@dataclass(frozen=True)
class NormLinf(Normalization):
    def apply(self, lp, K, point):
        for j in range(K):
            lp.set_bounds(j, -1.0, 1.0)
        lp.set_bounds(K, -1.0, 0.0)


@dataclass(frozen=True)
class RhsBound(Normalization):
    """``|pi_0| <= 1``."""

    def apply(self, lp, K, point):
        lp.set_bounds(K + 1, -1.0, 1.0)


@dataclass(frozen=True)
class NaturalUfp(Normalization):
    """``-1 <= pi_o``: the minimum-overflow decomposition in dual form.

    With the recession constraint ``pi_o <= 0`` this bounds the overflow
    coefficient, and every violated optimum has ``pi_o = -1``.
    """

    reducible = True

    def apply(self, lp, K, point):
        lp.set_bounds(K, -1.0, 0.0)


@dataclass(frozen=True, eq=False)
class Directional(Normalization):
    """One-sided ``(pi, pi_o).(point - anchor) <= 1`` toward an anchor in the polyhedron."""

    anchor: np.ndarray

    def apply(self, lp, K, point):
        d = np.asarray(point, dtype=float) - np.asarray(self.anchor, dtype=float)
        lp.add_constraint({j: float(d[j]) for j in range(K + 1) if d[j] != 0.0}, "<=", 1.0)


# helpers ---------------------------------------------------------------------


def as_point(point, K: int) -> np.ndarray:
    x = np.asarray(point, dtype=float).copy()
    if x.shape != (K + 1,):
        raise ValueError(f"expected a point of length {K + 1}, got shape {x.shape}")
    f, o = x[:K], x[K]
    if np.any(f < -1e-7) or np.any(f > 1 + 1e-7) or o < -1e-7:
        raise ValueError("point outside [0,1]^K x [0, inf)")
    x[:K] = np.clip(f, 0.0, 1.0)
    x[K] = max(o, 0.0)
    return x


def chain_vertices(block: BlockData, f) -> list[BlockVertex]:
    """Nested patterns whose convex hull contains ``f`` (sorted by decreasing value)."""
    order = np.argsort(-np.asarray(f, dtype=float), kind="stable")
    pattern = np.zeros(len(block), dtype=np.int64)
    out = [block.vertex(pattern)]
    for k in order:
        pattern[k] = 1
        out.append(block.vertex(pattern))
    return out


def tight_vertices(cut: Cut, vertices, tol: float = TIGHT_TOL) -> list[BlockVertex]:
    tol = tol * cut.scale
    out = []
    for v in vertices:
        lhs = cut.lhs(v.point)
        if abs(lhs - cut.rhs) <= tol:
            out.append(BlockVertex(v.pattern, v.overflow, lhs))
    return out


def segment_parameter(cut: Cut, outer, anchor) -> float:
    v1, v2 = cut.violation(outer), cut.violation(anchor)
    return v1 / (v1 - v2)


# separation core -------------------------------------------------------------


def _separate_full(point, block, norm, violation_tol, seeds) -> SeparationResult | AlreadyInside:
    K = len(block)
    lp = LinearProgram("max")
    for j in range(K):
        lp.add_variable(-math.inf, math.inf, point[j])
    lp.add_variable(-math.inf, 0.0, point[K])
    lp.add_variable(-math.inf, math.inf, -1.0)
    norm.apply(lp, K, point)

    known: dict[tuple, tuple[BlockVertex, int]] = {}

    def add(v: BlockVertex):
        if v.pattern in known:
            return False
        row = {j: 1.0 for j in range(K) if v.pattern[j]}
        if v.overflow:
            row[K] = v.overflow
        row[K + 1] = -1.0
        known[v.pattern] = (v, lp.add_constraint(row, "<=", 0.0))
        return True

    for v in seeds:
        add(v)
    for v in chain_vertices(block, point[:K]):
        add(v)

    calls = 0
    for _ in range(MAX_ROUNDS):
        sol = lp.solve()
        unbounded = sol.status is Status.UNBOUNDED
        if unbounded:
            # the known vertices do not bound the problem: query the oracle with
            # a boxed solution, whose large coefficients follow an unbounded ray
            sol = _boxed(lp, K, block)
        if not sol.optimal:
            raise NumericalFailure(f"separation LP {sol.status.value}")
        cut = Cut(sol.primal[:K], min(sol.primal[K], 0.0), float(sol.primal[K + 1]))
        if not unbounded and sol.objective <= violation_tol:
            return _inside(sol, known, calls)

        v = capacity_oracle(block, cut.weights())
        calls += 1
        if v.value - cut.rhs > max(ADD_TOL, 1e-12 * cut.scale) and add(v):
            continue
        if unbounded:
            raise UnboundedSeparation("separation LP unbounded under the normalization")

        cut.rhs = max(cut.rhs, v.value)
        violation = cut.violation(point)
        if violation <= violation_tol:
            return _inside(sol, known, calls)
        pool = [entry[0] for entry in known.values()]
        if v.pattern not in known:
            pool.append(v)
        return SeparationResult(cut, violation, tight_vertices(cut, pool), calls)
    raise NumericalFailure("constraint generation did not converge")


def _boxed(lp: LinearProgram, K: int, block: BlockData):
    box = BOX * max([1, *block.demands])
    boxed = lp.copy()
    for j in range(K + 1):
        boxed.set_bounds(j, max(boxed.lower[j], -box), min(boxed.upper[j], box))
    return boxed.solve()


def _inside(sol, known, calls) -> AlreadyInside:
    support, weights = [], []
    for v, row in known.values():
        lam = float(sol.duals[row])
        if lam > 1e-9:
            support.append(v)
            weights.append(lam)
    return AlreadyInside(support, weights, calls, violation=max(0.0, float(sol.objective)))


def separate(point, block: BlockData, norm: Normalization, violation_tol: float = 1e-6, *,
             seeds=(), reduce: bool = True) -> SeparationResult | AlreadyInside:
    """Maximally violated normalized cut at ``point``, or :class:`AlreadyInside`.

    ``seeds`` are vertices known to belong to the polyhedron (for a directional
    normalization, the vertices whose hull contains the anchor make the first
    restricted problem bounded).  With ``reduce`` and a normalization that
    survives lifting, coordinates of ``point`` at 0 or 1 are fixed first and
    the resulting cut is lifted back.
    """
    K = len(block)
    point = as_point(point, K)
    anchor = None
    if isinstance(norm, Directional):
        anchor = np.asarray(norm.anchor, dtype=float)
        if anchor.shape != point.shape:
            raise ValueError("anchor and point differ in dimension")
        if np.max(np.abs(anchor - point)) <= 1e-12:
            raise UnboundedSeparation("directional normalization with a zero direction")

    if reduce and norm.reducible:
        rpoint, rblock, fixed = reduce_dimension(point, block)
        if fixed:
            free = [k for k in range(K) if k not in fixed]
            rseeds = [_restrict(v, free, rblock) for v in seeds if all(v.pattern[k] == b for k, b in fixed.items())]
            res = _separate_full(rpoint, rblock, norm, violation_tol, rseeds)
            if isinstance(res, AlreadyInside):
                res.support = [_extend(v, fixed, free, block) for v in res.support]
                return res
            cut, extra, calls = _lift(res.cut, fixed, block)
            tight = [_extend(v, fixed, free, block) for v in res.tight_vertices] + extra
            return SeparationResult(cut, cut.violation(point), _dedupe(tight), res.oracle_calls + calls)

    seeds = list(seeds)
    if anchor is not None:
        seeds += chain_vertices(block, anchor[:K])
    res = _separate_full(point, block, norm, violation_tol, seeds)
    if anchor is not None and isinstance(res, SeparationResult):
        res.boundary_t = segment_parameter(res.cut, point, anchor)
    return res


def _dedupe(vertices):
    seen = {}
    for v in vertices:
        seen.setdefault(v.pattern, v)
    return list(seen.values())


def _restrict(v: BlockVertex, free, rblock: BlockData) -> BlockVertex:
    return rblock.vertex([v.pattern[k] for k in free])


def _extend(v: BlockVertex, fixed, free, block: BlockData) -> BlockVertex:
    pattern = [0] * len(block)
    for k, b in fixed.items():
        pattern[k] = b
    for k, b in zip(free, v.pattern):
        pattern[k] = b
    return block.vertex(pattern)


# dimensionality reduction and lifting ----------------------------------------


def face_block(block: BlockData, fixed: dict[int, int]) -> tuple[BlockData, list[int]]:
    """Block of the face where the commodities in ``fixed`` take their fixed values."""
    free = [k for k in range(len(block)) if k not in fixed]
    capacity = block.capacity - sum(block.demands[k] for k, b in fixed.items() if b)
    sub = BlockData(tuple(block.demands[k] for k in free), capacity, tuple(block.commodities[k] for k in free))
    return sub, free


def reduce_dimension(point, block: BlockData, fix_tol: float = FIX_TOL):
    """Fix the coordinates of ``point`` within ``fix_tol`` of 0 or 1.

    Returns ``(reduced point, reduced block, fixed)`` where ``fixed`` maps
    commodity positions to their fixed value and the reduced capacity subtracts
    the demands fixed at 1 (it may become negative).
    """
    K = len(block)
    point = np.asarray(point, dtype=float)
    fixed = {}
    for k in range(K):
        if point[k] <= fix_tol:
            fixed[k] = 0
        elif point[k] >= 1 - fix_tol:
            fixed[k] = 1
    rblock, free = face_block(block, fixed)
    rpoint = np.append(point[free], point[K])
    return rpoint, rblock, fixed


def lift_cut(cut: Cut, fixed: dict[int, int], block: BlockData) -> Cut:
    """Sequentially lift a cut valid on the face ``fixed`` to the whole polyhedron."""
    return _lift(cut, fixed, block)[0]


def _lift(cut: Cut, fixed: dict[int, int], block: BlockData):
    K = len(block)
    free = [k for k in range(K) if k not in fixed]
    if len(cut.coefs) != len(free):
        raise ValueError("cut dimension does not match the free coordinates")
    if not fixed:
        return Cut(cut.coefs.copy(), cut.overflow_coef, cut.rhs), [], 0

    gamma = np.zeros(K)
    gamma[free] = cut.coefs
    g_o, g_0 = cut.overflow_coef, cut.rhs
    remaining = dict(fixed)
    extra = []
    calls = 0
    order = sorted(k for k, b in fixed.items() if b) + sorted(k for k, b in fixed.items() if not b)
    for j in order:
        value = remaining.pop(j)
        # optimize over the face where j takes the opposite value
        face = dict(remaining)
        face[j] = 1 - value
        sub, sub_free = face_block(block, face)
        w = DualWeights(tuple(gamma[sub_free]), -g_o)
        v = capacity_oracle(sub, w)
        calls += 1
        best = v.value + sum(gamma[k] for k, b in face.items() if b)
        if value == 1:
            gamma[j] = best - g_0
            g_0 = best
        else:
            gamma[j] = g_0 - best
        extra.append(_extend(v, face, sub_free, block))

    lifted = Cut(gamma, g_o, g_0)
    gap = lifted.oracle_gap(block)
    calls += 1
    if gap > 1e-6 * lifted.scale:
        raise LiftingFailure(f"lifted cut violated by {gap:g}")
    lifted.rhs = max(lifted.rhs, lifted.rhs + gap)
    return lifted, extra, calls
