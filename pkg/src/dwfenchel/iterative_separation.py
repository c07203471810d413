"""Directional cuts computed through a secondary normalization.

Instead of solving the separation LP under the directional normalization, the
outer point is separated with a secondary normalization and the separated
point is slid along the segment toward the anchor, onto each new cut, until it
reaches the boundary of the polyhedron.  The last secondary cut then passes
through the boundary point of the segment, which is what the directional
normalization would have returned.
"""

from __future__ import annotations

import numpy as np

from .oracle import BlockData, capacity_oracle
from .separation import (
    AlreadyInside,
    Cut,
    NaturalUfp,
    Normalization,
    SeparationResult,
    as_point,
    separate,
    tight_vertices,
)

PARALLEL_TOL = 1e-10
MEMBERSHIP_TOL = 1e-6
MAX_ITERS = 10_000


class DegenerateIntersection(ArithmeticError):
    """The segment is (nearly) parallel to the cut."""


class IterationLimit(RuntimeError):
    pass


def segment_intersection(outer, anchor, cut: Cut, parallel_tol: float = PARALLEL_TOL):
    """Return ``(t, x')`` with ``x' = outer + t (anchor - outer)`` on the cut hyperplane."""
    outer = np.asarray(outer, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    v_out, v_in = cut.violation(outer), cut.violation(anchor)
    if v_out <= 0:
        raise ValueError("the cut must be violated at the outer point")
    if v_out - v_in < parallel_tol:
        raise DegenerateIntersection(f"segment nearly parallel to the cut ({v_out - v_in:g})")
    t = min(1.0, v_out / (v_out - v_in))
    return t, outer + t * (anchor - outer)


def directional_separate_iterative(outer, anchor, block: BlockData, secondary: Normalization | None = None, *,
                                   membership_tol: float = MEMBERSHIP_TOL, max_iters: int = MAX_ITERS,
                                   parallel_tol: float = PARALLEL_TOL, reduce: bool = True,
                                   ) -> SeparationResult | AlreadyInside:
    """Directional-normalization cut for ``outer`` toward ``anchor`` (a point of the polyhedron).

    ``steps`` on the result records the segment parameter after each projection
    and ``boundary_t`` the final one.  The tight vertices are those of the last
    secondary cut together with the vertices decomposing the boundary point.
    """
    secondary = secondary or NaturalUfp()
    K = len(block)
    outer = as_point(outer, K)
    anchor = as_point(anchor, K)

    t = 0.0
    current = outer
    last: SeparationResult | None = None
    steps: list[float] = []
    calls = 0
    for _ in range(max_iters):
        res = separate(current, block, secondary, membership_tol, reduce=reduce)
        calls += res.oracle_calls
        if isinstance(res, AlreadyInside):
            if last is None:
                res.oracle_calls = calls
                res.boundary_t = 0.0
                return res
            cut = Cut(last.cut.coefs, last.cut.overflow_coef, last.cut.rhs)
            cut.rhs = capacity_oracle(block, cut.weights()).value
            calls += 1
            pool = {v.pattern: v for v in last.tight_vertices + res.support}
            return SeparationResult(cut, cut.violation(outer), tight_vertices(cut, pool.values()), calls,
                                    boundary_t=t, steps=steps)
        t_new, point = segment_intersection(outer, anchor, res.cut, parallel_tol)
        last = res
        if t_new <= t:
            # the new cut already passes through the current point
            res.boundary_t, res.steps, res.oracle_calls = t, steps, calls
            return res
        t, current = t_new, point
        steps.append(t)
    raise IterationLimit(f"no boundary point after {max_iters} secondary separations")
