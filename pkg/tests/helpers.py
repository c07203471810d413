"""Independent oracles used by the tests: brute-force enumeration, vertex enumeration, qhull."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial import ConvexHull

from dwfenchel.decomposition import BlockLink, DecomposableProblem
from dwfenchel.lp_core import LinearProgram
from dwfenchel.oracle import BlockData


def brute_knapsack(profits, weights, capacity):
    best = 0
    for r in range(len(profits) + 1):
        for subset in itertools.combinations(range(len(profits)), r):
            if sum(weights[i] for i in subset) <= capacity:
                best = max(best, sum(profits[i] for i in subset))
    return best


def brute_oracle(block: BlockData, profits, price):
    """Maximum of profits.f - price*o over all patterns with tight overflow."""
    best = -math.inf
    for pattern in itertools.product((0, 1), repeat=len(block)):
        value = float(np.dot(profits, pattern)) - price * block.overflow(pattern) if pattern else 0.0
        best = max(best, value)
    return best


def all_points(block: BlockData) -> np.ndarray:
    pts = []
    for pattern in itertools.product((0, 1), repeat=len(block)):
        pts.append(list(pattern) + [block.overflow(pattern)])
    return np.array(pts, dtype=float).reshape(-1, len(block) + 1)


def lp_vertex_optimum(c, A, b, sense="max"):
    """Optimum of ``c x`` over ``A x <= b`` by enumerating basic solutions (None if infeasible)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    best = None
    for rows in itertools.combinations(range(len(A)), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ x <= b + 1e-9):
            val = float(np.dot(c, x))
            if best is None or (val > best if sense == "max" else val < best):
                best = val
    return best


def is_facet(block: BlockData, normal, rhs, tol=1e-7) -> bool:
    """Affine rank of the tight set (vertices plus the overflow ray when it lies in the face)."""
    pts = all_points(block)
    normal = np.asarray(normal, dtype=float)
    scale = max(1.0, float(np.max(np.abs(normal))))
    lhs = pts @ normal
    if np.any(lhs > rhs + tol * scale):
        return False
    tight = pts[np.abs(lhs - rhs) <= tol * scale]
    if len(tight) == 0:
        return False
    dirs = list(tight[1:] - tight[0])
    if abs(normal[-1]) <= tol * scale:
        ray = np.zeros(len(normal))
        ray[-1] = 1.0
        dirs.append(ray)
    rank = np.linalg.matrix_rank(np.array(dirs), tol=1e-9) if dirs else 0
    return rank == len(normal) - 1


def facet_count(block: BlockData) -> int:
    """Number of facets of the arc polyhedron, from qhull on a truncated copy."""
    pts = all_points(block)
    top = pts[:, -1].max() + 10.0
    lifted = pts.copy()
    lifted[:, -1] = top
    hull = ConvexHull(np.vstack([pts, lifted]))
    normals = set()
    for eq in hull.equations:
        a, b = eq[:-1], -eq[-1]
        if a[-1] > 1e-9:  # the artificial cap
            continue
        k = np.max(np.abs(a))
        normals.add(tuple(np.round(np.append(a, b) / k, 7)))
    return len(normals)


def point_in_hull(block: BlockData, point) -> bool:
    """LP feasibility: ``point`` is a convex combination of vertices plus the overflow ray."""
    from scipy.optimize import linprog

    pts = all_points(block)
    n = len(pts)
    K = len(block)
    A_eq = np.vstack([pts[:, :K].T, np.ones(n)])
    b_eq = np.append(point[:K], 1.0)
    A_ub = pts[:, K][None, :]
    res = linprog(np.zeros(n), A_ub=A_ub, b_ub=[point[K] + 1e-9], A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * n,
                  method="highs")
    return res.status == 0


def single_block_problem(rng, K=None) -> DecomposableProblem:
    """One arc polyhedron under random packing rows; minimize overflow minus rewards."""
    K = K or int(rng.integers(2, 7))
    demands = tuple(int(d) for d in rng.integers(1, 20, size=K))
    capacity = int(rng.integers(max(1, sum(demands) // 4), max(2, sum(demands))))
    block = BlockData(demands, capacity)
    lp = LinearProgram("min")
    f = [lp.add_variable(0.0, 1.0, -float(rng.uniform(0.5, 3.0)) * d / 5) for d in demands]
    o = lp.add_variable(0.0, math.inf, 1.0)
    for _ in range(int(rng.integers(1, 3))):
        w = rng.integers(0, 4, size=K)
        lp.add_constraint({f[k]: float(w[k]) for k in range(K) if w[k]}, "<=", float(max(1, w.sum() // 2)))
    link = BlockLink(block, [{j: 1.0} for j in f], {o: 1.0})
    return DecomposableProblem(lp, [link], np.zeros(K + 1))


def toy_problem():
    """Three commodities choosing between a two-arc path and a direct arc."""
    from dwfenchel.ufp import Arc, Commodity, UfpInstance, build_problem

    inst = UfpInstance(
        3,
        [Arc(0, 1, 5), Arc(1, 2, 5), Arc(0, 2, 5), Arc(2, 0, 9), Arc(1, 0, 9), Arc(2, 1, 9)],
        [Commodity(0, 2, 3), Commodity(0, 2, 4), Commodity(0, 2, 4)],
    )
    paths = [[(0, 1), (2,)]] * 3
    return inst, build_problem(inst, paths)


def farthest_segment_point(block: BlockData, inner, outer) -> float:
    """Largest s with ``inner + s (outer - inner)`` in the enumerated hull (plus the overflow ray)."""
    from scipy.optimize import linprog

    pts = all_points(block)
    n, K = len(pts), len(block)
    d = np.asarray(outer, dtype=float) - np.asarray(inner, dtype=float)
    A_eq = np.hstack([np.vstack([pts[:, :K].T, np.ones(n)]), np.append(-d[:K], 0.0)[:, None]])
    b_eq = np.append(np.asarray(inner, dtype=float)[:K], 1.0)
    A_ub = np.append(pts[:, K], -d[K])[None, :]
    res = linprog(np.append(np.zeros(n), -1.0), A_ub=A_ub, b_ub=[inner[K]], A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(0, 1)], method="highs")
    return float(res.x[-1])
