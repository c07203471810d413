"""Exact linear optimization over one arc's soft-capacity polyhedron.

The polyhedron of an arc is the convex hull of the points ``(f, o)`` with
``f`` a 0-1 commodity pattern and ``o >= max(0, f.D - c)``.  Maximizing
``profits.f - overflow_price * o`` over it splits into two 0-1 knapsacks:
patterns that fit the capacity (``o = 0``) and patterns that overflow it, the
latter solved on the complemented variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DUAL_SCALE = 1e7
DP_CAPACITY_LIMIT = 2**20
MAX_ENUMERATION = 20


class UnboundedOracle(ValueError):
    """Negative overflow price: the objective grows without bound along the overflow ray."""


class OverflowRisk(OverflowError):
    """Scaled integer profits would overflow 64-bit dynamic-programming sums."""


@dataclass(frozen=True)
class BlockData:
    """Demands and capacity of one arc.

    ``capacity`` may be zero or negative for the faces produced by fixing
    commodities at 1; the arc polyhedra themselves always have capacity >= 1.
    """

    demands: tuple[int, ...]
    capacity: int
    commodities: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(int(d) for d in self.demands))
        object.__setattr__(self, "capacity", int(self.capacity))
        if not self.commodities:
            object.__setattr__(self, "commodities", tuple(range(len(self.demands))))
        else:
            object.__setattr__(self, "commodities", tuple(self.commodities))
        if len(self.commodities) != len(self.demands):
            raise ValueError("one commodity id per demand is required")
        if any(d < 1 for d in self.demands):
            raise ValueError("demands must be >= 1")

    def __len__(self):
        return len(self.demands)

    def overflow(self, pattern) -> int:
        load = int(np.dot(np.asarray(pattern, dtype=np.int64), np.asarray(self.demands, dtype=np.int64))) if self.demands else 0
        return max(0, load - self.capacity)

    def vertex(self, pattern, weights: DualWeights | None = None) -> BlockVertex:
        pattern = tuple(int(v) for v in pattern)
        over = self.overflow(pattern)
        value = 0.0 if weights is None else weights.evaluate(pattern, over)
        return BlockVertex(pattern, float(over), value)


@dataclass(frozen=True)
class BlockVertex:
    """A commodity pattern with its tight overflow; equality is pattern-level."""

    pattern: tuple[int, ...]
    overflow: float
    value: float = field(default=0.0, compare=False)

    @property
    def point(self) -> np.ndarray:
        return np.array(self.pattern + (self.overflow,), dtype=float)


@dataclass(frozen=True)
class DualWeights:
    profits: tuple[float, ...]
    overflow_price: float

    def __post_init__(self):
        object.__setattr__(self, "profits", tuple(self.profits))

    def evaluate(self, pattern, overflow) -> float:
        return float(np.dot(self.profits, pattern)) - self.overflow_price * overflow if self.profits else -self.overflow_price * overflow


def _as_profit_array(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size and arr.dtype.kind in "iub":
        return arr.astype(np.int64)
    return arr.astype(float)


def solve_knapsack(profits, weights, capacity) -> tuple[tuple[int, ...], float]:
    """Exact 0-1 knapsack: return (chosen item indices, total profit).

    Items with non-positive profit are never chosen.  Dynamic programming over
    the capacity is used up to ``DP_CAPACITY_LIMIT``; beyond it a depth-first
    branch and bound with the fractional bound takes over.
    """
    p = _as_profit_array(profits)
    w = np.asarray(weights, dtype=np.int64)
    capacity = int(capacity)
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    if len(p) != len(w):
        raise ValueError("profits and weights differ in length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")

    items = [i for i in range(len(p)) if p[i] > 0 and w[i] <= capacity]
    zero = p.dtype.type(0)
    if not items:
        return (), zero.item()
    if int(w[items].sum()) <= capacity:
        return tuple(items), p[items].sum().item()
    cap = min(capacity, int(w[items].sum()))
    if cap <= DP_CAPACITY_LIMIT:
        chosen = _knapsack_dp(p[items], w[items], cap)
    else:
        chosen = _knapsack_bnb(p[items], w[items], cap)
    picked = tuple(sorted(items[i] for i in chosen))
    return picked, (p[list(picked)].sum().item() if picked else zero.item())


def _knapsack_dp(p: np.ndarray, w: np.ndarray, cap: int) -> list[int]:
    n = len(p)
    best = np.zeros(cap + 1, dtype=p.dtype)
    take = np.zeros((n, cap + 1), dtype=bool)
    for i in range(n):
        wi = int(w[i])
        cand = best[: cap + 1 - wi] + p[i]
        better = cand > best[wi:]
        take[i, wi:] = better
        best[wi:] = np.where(better, cand, best[wi:])
    chosen = []
    c = cap
    for i in range(n - 1, -1, -1):
        if take[i, c]:
            chosen.append(i)
            c -= int(w[i])
    return chosen


def _knapsack_bnb(p: np.ndarray, w: np.ndarray, cap: int) -> list[int]:
    order = sorted(range(len(p)), key=lambda i: p[i] / w[i], reverse=True)
    ps = [p[i] for i in order]
    ws = [int(w[i]) for i in order]
    n = len(order)
    best_val = 0
    best_set: list[int] = []

    def bound(level, weight, value):
        for k in range(level, n):
            if weight + ws[k] <= cap:
                weight += ws[k]
                value += ps[k]
            else:
                return value + (cap - weight) * ps[k] / ws[k]
        return value

    stack = [(0, 0, 0, [])]
    while stack:
        level, weight, value, chosen = stack.pop()
        if value > best_val:
            best_val, best_set = value, chosen
        if level == n or bound(level, weight, value) <= best_val:
            continue
        stack.append((level + 1, weight, value, chosen))
        if weight + ws[level] <= cap:
            stack.append((level + 1, weight + ws[level], value + ps[level], chosen + [level]))
    return [order[k] for k in best_set]


def complement_constant(block: BlockData, weights: DualWeights) -> float:
    """Constant term of the overflowing case after complementing the variables.

    Substituting ``o = f.D - c`` and ``f = 1 - g`` into ``profits.f - p_o * o``
    gives ``sum_k (profit_k - p_o D_k) + p_o c + sum_k (p_o D_k - profit_k) g_k``.
    """
    po = weights.overflow_price
    return float(sum(pk - po * d for pk, d in zip(weights.profits, block.demands)) + po * block.capacity)


def complement_objective(block: BlockData, weights: DualWeights, pattern) -> float:
    """Objective of the complemented knapsack evaluated at ``pattern``."""
    po = weights.overflow_price
    g = 1 - np.asarray(pattern, dtype=float)
    q = np.asarray([po * d - pk for pk, d in zip(weights.profits, block.demands)], dtype=float)
    return complement_constant(block, weights) + float(np.dot(q, g)) if len(q) else complement_constant(block, weights)


def capacity_oracle(block: BlockData, weights: DualWeights, scale: float | None = None) -> BlockVertex:
    """Vertex maximizing ``profits.f - overflow_price * o`` over the arc polyhedron.

    With ``scale`` set, patterns are chosen on integer weights obtained by
    :func:`scale_duals` and the returned value is evaluated on the real weights.
    """
    if weights.overflow_price < 0:
        raise UnboundedOracle(f"overflow price {weights.overflow_price} < 0")
    if len(weights.profits) != len(block):
        raise ValueError("one profit per commodity is required")
    choose = scale_duals(weights.profits, weights.overflow_price, scale) if scale else weights
    profits = _as_profit_array(choose.profits) if choose.profits else np.zeros(0)
    po = choose.overflow_price
    demands = np.asarray(block.demands, dtype=np.int64)
    n = len(demands)
    total = int(demands.sum()) if n else 0

    candidates = []
    if block.capacity >= 0:
        fit, _ = solve_knapsack(profits, demands, block.capacity)
        pattern = np.zeros(n, dtype=np.int64)
        pattern[list(fit)] = 1
        candidates.append(pattern)
    if total - block.capacity >= 0:
        comp_profits = po * demands - profits
        out, _ = solve_knapsack(comp_profits, demands, total - block.capacity)
        pattern = np.ones(n, dtype=np.int64)
        pattern[list(out)] = 0
        candidates.append(pattern)

    best, best_val = None, -math.inf
    for pattern in candidates:
        val = choose.evaluate(pattern, block.overflow(pattern))
        if val > best_val:  # ties keep the non-overflowing case
            best, best_val = pattern, val
    return block.vertex(best, weights)


def scale_duals(profits, overflow_price, factor: float = DUAL_SCALE) -> DualWeights:
    """Multiply by ``factor`` and truncate toward zero to integers."""
    if factor <= 0:
        raise ValueError("factor must be positive")
    values = np.asarray(list(profits) + [overflow_price], dtype=float) * factor
    limit = 2**62 // (len(values) + 1)
    if np.any(np.abs(values) > limit):
        raise OverflowRisk(f"scaled coefficients exceed {limit}")
    ints = np.trunc(values).astype(np.int64)
    return DualWeights(tuple(int(v) for v in ints[:-1]), int(ints[-1]))


def enumerate_vertices(block: BlockData) -> list[BlockVertex]:
    """All 2^K patterns with tight overflow (refuses K > MAX_ENUMERATION)."""
    n = len(block)
    if n > MAX_ENUMERATION:
        raise ValueError(f"refusing to enumerate 2^{n} patterns")
    codes = np.arange(2**n, dtype=np.int64)
    patterns = (codes[:, None] >> np.arange(n)) & 1
    loads = patterns @ np.asarray(block.demands, dtype=np.int64) if n else np.zeros(1, dtype=np.int64)
    overflow = np.maximum(0, loads - block.capacity)
    return [BlockVertex(tuple(int(v) for v in row), float(o)) for row, o in zip(patterns, overflow)]
