"""Unsplittable flow instances: generation, admissible paths and the path formulation.

Capacities are soft.  Every arc carries an overflow variable and the
objective is the total overflow, so every routing is feasible and the bound
of interest is how much overflow any routing must incur.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .decomposition import BlockLink, DecomposableProblem
from .lp_core import LinearProgram
from .oracle import BlockData

K_PATHS = 4
ARC_DENSITY = 3.0
PERTURBATION_ROUNDS_PER_NODE = 100
RETRY_LIMIT = 50


class GenerationFailure(RuntimeError):
    pass


class NoPath(ValueError):
    pass


class EmptyPathSet(ValueError):
    pass


class Arc(NamedTuple):
    tail: int
    head: int
    capacity: int


class Commodity(NamedTuple):
    origin: int
    destination: int
    demand: int


@dataclass
class UfpInstance:
    nodes: int
    arcs: list[Arc]
    commodities: list[Commodity]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.arcs = [Arc(*map(int, a)) for a in self.arcs]
        self.commodities = [Commodity(*map(int, c)) for c in self.commodities]
        for a in self.arcs:
            if not (0 <= a.tail < self.nodes and 0 <= a.head < self.nodes) or a.tail == a.head:
                raise ValueError(f"invalid arc {a}")
            if a.capacity < 1:
                raise ValueError(f"arc capacity must be >= 1: {a}")
        for c in self.commodities:
            if c.origin == c.destination or c.demand < 1:
                raise ValueError(f"invalid commodity {c}")

    def out_arcs(self) -> list[list[int]]:
        out = [[] for _ in range(self.nodes)]
        for i, a in enumerate(self.arcs):
            out[a.tail].append(i)
        return out

    def loads(self, routing) -> np.ndarray:
        """Arc loads of one path (arc-id sequence) per commodity."""
        load = np.zeros(len(self.arcs), dtype=np.int64)
        for c, path in zip(self.commodities, routing):
            for a in path:
                load[a] += c.demand
        return load

    def overflow(self, routing) -> int:
        caps = np.array([a.capacity for a in self.arcs], dtype=np.int64)
        return int(np.maximum(0, self.loads(routing) - caps).sum())

    def is_path(self, path, origin, destination) -> bool:
        node, seen = origin, {origin}
        for a in path:
            arc = self.arcs[a]
            if arc.tail != node or arc.head in seen:
                return False
            node = arc.head
            seen.add(node)
        return node == destination and len(path) > 0

    def to_json(self) -> str:
        doc = {
            "nodes": self.nodes,
            "arcs": [a._asdict() for a in self.arcs],
            "commodities": [c._asdict() for c in self.commodities],
            "metadata": self.metadata,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> UfpInstance:
        doc = json.loads(text)
        return cls(
            int(doc["nodes"]),
            [Arc(a["tail"], a["head"], a["capacity"]) for a in doc["arcs"]],
            [Commodity(c["origin"], c["destination"], c["demand"]) for c in doc["commodities"]],
            doc.get("metadata", {}),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> UfpInstance:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class GeneratorParams:
    nodes: int
    d_max: int
    capacity: int
    arc_density: float = ARC_DENSITY
    max_commodities: int | None = None
    retry_limit: int = RETRY_LIMIT

    def __post_init__(self):
        if self.nodes < 3:
            raise ValueError("at least 3 nodes are required")
        if not 1 <= self.d_max <= self.capacity:
            raise ValueError("need 1 <= d_max <= capacity")
        if self.arc_density < 1:
            raise ValueError("arc density must be >= 1 (the Hamiltonian cycle)")
        if self.max_commodities is not None and self.max_commodities < 1:
            raise ValueError("max_commodities must be >= 1")


def _residual_path(instance: UfpInstance, residual, origin, dest_rng):
    out = instance.out_arcs()
    heads = [a.head for a in instance.arcs]
    parent = [-1] * instance.nodes
    seen = [False] * instance.nodes
    seen[origin] = True
    queue = deque([origin])
    while queue:
        u = queue.popleft()
        for a in out[u]:
            v = heads[a]
            if residual[a] >= 1 and not seen[v]:
                seen[v] = True
                parent[v] = a
                queue.append(v)
    reachable = [v for v in range(instance.nodes) if seen[v] and v != origin]
    if not reachable:
        return None
    dest = reachable[int(dest_rng.integers(len(reachable)))]
    path = []
    v = dest
    while v != origin:
        a = parent[v]
        path.append(a)
        v = instance.arcs[a].tail
    return dest, path[::-1]


def generate_instance(params: GeneratorParams, seed: int) -> UfpInstance:
    """Random strongly connected graph with commodities routed within capacity.

    Commodities are added one at a time along a shortest path of the residual
    graph, so their creation paths form a routing without overflow.  That
    routing is stored as ``metadata['certificate_paths']``.
    """
    rng = np.random.default_rng(seed)
    n = params.nodes
    order = rng.permutation(n)
    pairs = [(int(order[i]), int(order[(i + 1) % n])) for i in range(n)]
    present = set(pairs)
    target = min(int(round(params.arc_density * n)), n * (n - 1))
    while len(pairs) < target:
        u, v = (int(x) for x in rng.integers(n, size=2))
        if u != v and (u, v) not in present:
            present.add((u, v))
            pairs.append((u, v))
    arcs = [Arc(u, v, params.capacity) for u, v in pairs]
    instance = UfpInstance(n, arcs, [], {})

    residual = [params.capacity] * len(arcs)
    commodities, certificate = [], []
    low = max(1, math.ceil(params.d_max / 2))
    failures = 0
    while failures < params.retry_limit:
        if params.max_commodities is not None and len(commodities) >= params.max_commodities:
            break
        origin = int(rng.integers(n))
        found = _residual_path(instance, residual, origin, rng)
        if found is None:
            failures += 1
            continue
        dest, path = found
        bottleneck = min(residual[a] for a in path)
        demand = min(bottleneck, int(rng.integers(low, params.d_max + 1)))
        for a in path:
            residual[a] -= demand
        commodities.append(Commodity(origin, dest, demand))
        certificate.append(path)
        failures = 0
    if not commodities:
        raise GenerationFailure("no commodity could be routed in the residual graph")

    meta = {
        "seed": int(seed),
        "params": {
            "nodes": params.nodes,
            "d_max": params.d_max,
            "capacity": params.capacity,
            "arc_density": params.arc_density,
            "max_commodities": params.max_commodities,
        },
        "certificate_paths": certificate,
    }
    return UfpInstance(n, arcs, commodities, meta)


def perturb_capacities(instance: UfpInstance, rounds: int | None = None, seed: int = 0) -> UfpInstance:
    """Move single units of capacity between outgoing arcs of commodity origins.

    Each round picks a commodity origin and two distinct outgoing arcs, adds 1
    to one and removes 1 from the other; rounds that would bring an arc below
    1, or whose origin has a single outgoing arc, change nothing.
    """
    if rounds is None:
        rounds = PERTURBATION_ROUNDS_PER_NODE * instance.nodes
    caps = [a.capacity for a in instance.arcs]
    out = instance.out_arcs()
    rng = np.random.default_rng(seed)
    skipped = 0
    if instance.commodities:
        for _ in range(rounds):
            origin = instance.commodities[int(rng.integers(len(instance.commodities)))].origin
            if len(out[origin]) < 2:
                skipped += 1
                continue
            up, down = (out[origin][int(i)] for i in rng.choice(len(out[origin]), size=2, replace=False))
            if caps[down] <= 1:
                skipped += 1
                continue
            caps[up] += 1
            caps[down] -= 1
    meta = dict(instance.metadata)
    meta["perturbation"] = {"rounds": int(rounds), "seed": int(seed), "skipped": skipped}
    arcs = [Arc(a.tail, a.head, c) for a, c in zip(instance.arcs, caps)]
    return UfpInstance(instance.nodes, arcs, list(instance.commodities), meta)


# paths ----------------------------------------------------------------------


def _lexmin_shortest(instance: UfpInstance, out, origin, destination, banned_arcs, banned_nodes):
    """Fewest-arc path, lexicographically smallest arc-id sequence among those; None if unreachable."""
    n = instance.nodes
    incoming = [[] for _ in range(n)]
    for u in range(n):
        if u in banned_nodes:
            continue
        for a in out[u]:
            if a not in banned_arcs and instance.arcs[a].head not in banned_nodes:
                incoming[instance.arcs[a].head].append(a)
    # hop distance to the destination
    dist = [math.inf] * n
    dist[destination] = 0
    queue = deque([destination])
    while queue:
        v = queue.popleft()
        for a in incoming[v]:
            u = instance.arcs[a].tail
            if dist[u] == math.inf:
                dist[u] = dist[v] + 1
                queue.append(u)
    if dist[origin] == math.inf:
        return None
    path, u = [], origin
    while u != destination:
        step = min(a for a in out[u]
                   if a not in banned_arcs and instance.arcs[a].head not in banned_nodes
                   and dist[instance.arcs[a].head] == dist[u] - 1)
        path.append(step)
        u = instance.arcs[step].head
    return path


def k_shortest_paths(instance: UfpInstance, origin: int, destination: int, k: int = K_PATHS) -> list[tuple[int, ...]]:
    """Up to ``k`` loopless paths in increasing (hop count, arc-id sequence) order (Yen)."""
    if origin == destination:
        raise ValueError("origin and destination coincide")
    out = instance.out_arcs()
    first = _lexmin_shortest(instance, out, origin, destination, set(), set())
    if first is None:
        raise NoPath(f"node {destination} unreachable from {origin}")
    found = [tuple(first)]
    candidates: list[tuple[int, tuple[int, ...]]] = []
    seen = {found[0]}
    while len(found) < k:
        last = found[-1]
        nodes = [origin] + [instance.arcs[a].head for a in last]
        for i in range(len(last)):
            root = last[:i]
            spur = nodes[i]
            banned_arcs = {p[i] for p in found if p[:i] == root}
            banned_nodes = set(nodes[:i])
            tail = _lexmin_shortest(instance, out, spur, destination, banned_arcs, banned_nodes)
            if tail is None:
                continue
            path = root + tuple(tail)
            if path not in seen:
                seen.add(path)
                heapq.heappush(candidates, (len(path), path))
        if not candidates:
            break
        found.append(heapq.heappop(candidates)[1])
    return found


def path_sets(instance: UfpInstance, k: int = K_PATHS) -> list[list[tuple[int, ...]]]:
    """``k`` shortest paths per commodity, plus its creation path when recorded."""
    certificate = instance.metadata.get("certificate_paths") or []
    out = []
    for i, c in enumerate(instance.commodities):
        paths = k_shortest_paths(instance, c.origin, c.destination, k)
        if i < len(certificate):
            extra = tuple(certificate[i])
            if extra not in paths:
                paths.append(extra)
        out.append(paths)
    return out


# formulation ----------------------------------------------------------------


@dataclass
class UfpProblem:
    problem: DecomposableProblem
    paths: list[list[tuple[int, ...]]]
    path_vars: list[list[int]]
    overflow_vars: dict[int, int]
    block_arcs: list[int]


def build_problem(instance: UfpInstance, paths) -> UfpProblem:
    """Path formulation: one 0-1 choice per path, one overflow variable and block per used arc."""
    if len(paths) != len(instance.commodities):
        raise ValueError("one path list per commodity is required")
    for i, (c, ps) in enumerate(zip(instance.commodities, paths)):
        if not ps:
            raise EmptyPathSet(f"commodity {i} has no admissible path")
        for p in ps:
            if not instance.is_path(p, c.origin, c.destination):
                raise ValueError(f"commodity {i}: {p} is not a loopless origin-destination path")

    lp = LinearProgram("min")
    path_vars = [[lp.add_variable(0.0, 1.0, 0.0) for _ in ps] for ps in paths]
    for xs in path_vars:
        lp.add_constraint({j: 1.0 for j in xs}, "=", 1.0)

    using: dict[int, dict[int, list[int]]] = {}
    for k, (ps, xs) in enumerate(zip(paths, path_vars)):
        for p, j in zip(ps, xs):
            for a in p:
                using.setdefault(a, {}).setdefault(k, []).append(j)

    blocks, overflow_vars, block_arcs = [], {}, []
    for a in sorted(using):
        ks = sorted(using[a])
        delta = lp.add_variable(0.0, math.inf, 1.0)
        overflow_vars[a] = delta
        block = BlockData(tuple(instance.commodities[k].demand for k in ks), instance.arcs[a].capacity, tuple(ks))
        f_exprs = [{j: 1.0 for j in using[a][k]} for k in ks]
        blocks.append(BlockLink(block, f_exprs, {delta: 1.0}))
        block_arcs.append(a)

    seed = np.zeros(lp.num_variables)
    certificate = instance.metadata.get("certificate_paths") or []
    routing = []
    for k, (ps, xs) in enumerate(zip(paths, path_vars)):
        choice = 0
        if k < len(certificate) and tuple(certificate[k]) in ps:
            choice = ps.index(tuple(certificate[k]))
        seed[xs[choice]] = 1.0
        routing.append(ps[choice])
    loads = instance.loads(routing)
    for a, j in overflow_vars.items():
        seed[j] = max(0, loads[a] - instance.arcs[a].capacity)

    return UfpProblem(DecomposableProblem(lp, blocks, seed), [list(ps) for ps in paths], path_vars, overflow_vars, block_arcs)
