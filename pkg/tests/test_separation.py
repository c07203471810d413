import numpy as np
import pytest

from dwfenchel.oracle import BlockData
from dwfenchel.separation import (
    AlreadyInside,
    Cut,
    Directional,
    NaturalUfp,
    NormL1,
    NormLinf,
    RhsBound,
    SeparationResult,
    UnboundedSeparation,
    chain_vertices,
    face_block,
    lift_cut,
    reduce_dimension,
    separate,
)

from helpers import all_points, is_facet, point_in_hull


def random_case(rng, kmax=6):
    K = int(rng.integers(1, kmax + 1))
    demands = tuple(int(d) for d in rng.integers(1, 20, size=K))
    block = BlockData(demands, int(rng.integers(1, max(2, sum(demands)))))
    point = np.append(rng.uniform(0, 1, size=K), rng.uniform(0, 0.5) * max(demands))
    return block, point


def test_point_inside_returns_decomposition():
    block = BlockData((6, 5), 10)
    res = separate([0.5, 0.5, 0.0], block, NaturalUfp())
    assert isinstance(res, AlreadyInside)
    assert sum(res.weights) == pytest.approx(1.0)
    mix = sum(w * v.point for w, v in zip(res.weights, res.support))
    assert mix[:2] == pytest.approx([0.5, 0.5])
    assert mix[2] <= 1e-9


def test_natural_cut_example():
    block = BlockData((6, 5), 10)
    res = separate([1.0, 1.0, 0.0], block, NaturalUfp())
    assert isinstance(res, SeparationResult)
    assert res.cut.overflow_coef == pytest.approx(-1.0)
    assert res.violation == pytest.approx(1.0)
    assert res.cut.oracle_gap(block) <= 1e-9
    assert is_facet(block, res.cut.normal, res.cut.rhs)


def test_natural_violation_is_min_overflow_gap():
    # with pi_o = -1 the violation is the least overflow reaching f minus o
    block = BlockData((3, 3), 3)
    res = separate([1.0, 0.5, 0.0], block, NaturalUfp())
    assert res.cut.overflow_coef == pytest.approx(-1.0)
    assert res.violation == pytest.approx(1.5)


@pytest.mark.parametrize("norm", [NaturalUfp(), NormL1(), NormLinf()])
def test_cuts_valid_and_separating(norm):
    rng = np.random.default_rng(11)
    seen = 0
    for _ in range(120):
        block, point = random_case(rng)
        res = separate(point, block, norm)
        inside = point_in_hull(block, point)
        if isinstance(res, AlreadyInside):
            assert inside or res.violation <= 1e-6
            continue
        seen += 1
        assert not inside
        assert res.violation > 1e-6
        pts = all_points(block)
        assert np.max(pts @ res.cut.normal) <= res.cut.rhs + 1e-9
        assert res.cut.overflow_coef <= 0
        assert res.tight_vertices
    assert seen > 20


def test_natural_cuts_are_facets():
    rng = np.random.default_rng(5)
    total = facets = 0
    for _ in range(150):
        block, point = random_case(rng)
        res = separate(point, block, NaturalUfp())
        if isinstance(res, SeparationResult):
            total += 1
            facets += is_facet(block, res.cut.normal, res.cut.rhs)
    assert total > 30
    assert facets / total >= 0.95


def test_reduction_matches_full_violation():
    rng = np.random.default_rng(2)
    for _ in range(100):
        block, point = random_case(rng)
        point[: len(block)] = np.where(rng.uniform(size=len(block)) < 0.4, rng.integers(0, 2, len(block)),
                                       point[: len(block)])
        a = separate(point, block, NaturalUfp(), reduce=True)
        b = separate(point, block, NaturalUfp(), reduce=False)
        assert type(a) is type(b)
        if isinstance(a, SeparationResult):
            assert a.violation == pytest.approx(b.violation, abs=1e-6)
            assert a.cut.oracle_gap(block) <= 1e-9


def test_reduce_dimension_example():
    block = BlockData((4, 5, 6), 8)
    rpoint, rblock, fixed = reduce_dimension([1.0, 0.3, 0.0, 2.0], block)
    assert fixed == {0: 1, 2: 0}
    assert rblock.demands == (5,) and rblock.capacity == 4
    assert rpoint == pytest.approx([0.3, 2.0])


def test_face_capacity_may_go_negative():
    sub, free = face_block(BlockData((6, 5, 4), 5), {0: 1})
    assert sub.capacity == -1 and free == [1, 2]
    # every pattern on that face overflows
    assert all(v.overflow > 0 for v in [sub.vertex((0, 0)), sub.vertex((1, 1))])


def test_lift_example():
    block = BlockData((3, 3), 3)
    # on the face f_0 = 1 the reduced capacity is 0 and o >= 3 f_1 holds
    lifted = lift_cut(Cut([3.0], -1.0, 0.0), {0: 1}, block)
    assert np.max(all_points(block) @ lifted.normal) <= lifted.rhs + 1e-12
    assert is_facet(block, lifted.normal, lifted.rhs)


def test_lifted_cuts_valid_on_random_faces():
    rng = np.random.default_rng(8)
    for _ in range(80):
        block, point = random_case(rng)
        K = len(block)
        point[:K] = np.where(rng.uniform(size=K) < 0.5, rng.integers(0, 2, K), point[:K])
        res = separate(point, block, NaturalUfp())
        if isinstance(res, SeparationResult):
            assert np.max(all_points(block) @ res.cut.normal) <= res.cut.rhs + 1e-9


def test_directional_boundary_point():
    block = BlockData((3, 3), 3)
    outer = np.array([1.0, 1.0, 0.0])
    anchor = np.array([0.0, 0.0, 0.0])
    res = separate(outer, block, Directional(anchor))
    assert isinstance(res, SeparationResult)
    # (s, s, 0) lies in the hull exactly for s <= 1/2
    assert res.boundary_t == pytest.approx(0.5)
    boundary = outer + res.boundary_t * (anchor - outer)
    assert res.cut.violation(boundary) == pytest.approx(0.0, abs=1e-9)


def test_directional_zero_direction():
    block = BlockData((3, 3), 3)
    with pytest.raises(UnboundedSeparation):
        separate([0.5, 0.5, 0.0], block, Directional(np.array([0.5, 0.5, 0.0])))


def test_rhs_bound_unbounded_through_origin():
    # zero capacity: 3f - o <= 0 is valid and violated, so its multiples are too
    block = BlockData((3,), 0)
    with pytest.raises(UnboundedSeparation):
        separate([1.0, 0.0], block, RhsBound())
    # no valid cut through the origin separates (1, 1, 0) here
    res = separate([1.0, 1.0, 0.0], BlockData((3, 3), 3), RhsBound())
    assert isinstance(res, SeparationResult) and abs(res.cut.rhs) <= 1 + 1e-9


def test_chain_vertices_contain_point():
    block = BlockData((2, 3, 4), 4)
    f = np.array([0.2, 0.9, 0.5])
    chain = chain_vertices(block, f)
    assert len(chain) == 4
    pats = np.array([v.pattern for v in chain], dtype=float)
    # consecutive differences of the sorted values are the convex weights
    s = np.sort(f)[::-1]
    w = -np.diff(np.concatenate([[1.0], s, [0.0]]))
    assert w.sum() == pytest.approx(1.0) and np.all(w >= 0)
    assert (w @ pats) == pytest.approx(f)


def test_point_validation():
    with pytest.raises(ValueError):
        separate([1.5, 0.0], BlockData((1,), 1), NaturalUfp())
    with pytest.raises(ValueError):
        separate([0.5], BlockData((1,), 1), NaturalUfp())
