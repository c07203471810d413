import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwfenchel.lp_core import DUALITY_TOL, LinearProgram, Status, add_constraint, add_variable, dual_objective, solve

from helpers import lp_vertex_optimum


def test_single_variable_bound():
    lp = LinearProgram("max")
    x = lp.add_variable(0.0, math.inf, 1.0)
    r = lp.add_constraint({x: 1.0}, "<=", 1.0)
    sol = solve(lp)
    assert sol.status is Status.OPTIMAL
    assert sol.primal[x] == pytest.approx(1.0)
    assert sol.duals[r] == pytest.approx(1.0)
    assert sol.objective == pytest.approx(1.0)


def test_infeasible():
    lp = LinearProgram("min")
    x = lp.add_variable(0.0, math.inf, 0.0)
    lp.add_constraint({x: 1.0}, "<=", -1.0)
    assert solve(lp).status is Status.INFEASIBLE


def test_unbounded():
    lp = LinearProgram("max")
    lp.add_variable(0.0, math.inf, 1.0)
    assert solve(lp).status is Status.UNBOUNDED


def test_degenerate_duals_satisfy_duality():
    lp = LinearProgram("max")
    x = lp.add_variable(0.0, math.inf, 1.0)
    y = lp.add_variable(0.0, math.inf, 1.0)
    lp.add_constraint({x: 1.0, y: 1.0}, "<=", 1.0)
    lp.add_constraint({x: 1.0}, "<=", 0.6)
    sol = solve(lp)
    assert sol.objective == pytest.approx(1.0)
    assert abs(dual_objective(lp, sol) - sol.objective) <= DUALITY_TOL
    assert lp_vertex_optimum([1, 1], [[1, 1], [1, 0], [-1, 0], [0, -1]], [1, 0.6, 0, 0]) == pytest.approx(1.0)


def test_add_constraint_tightens():
    lp = LinearProgram("max")
    x = lp.add_variable(0.0, math.inf, 1.0)
    lp.add_constraint({x: 1.0}, "<=", 1.0)
    i = add_constraint(lp, {x: 1.0}, "<=", 0.5)
    assert i == 1
    assert solve(lp).objective == pytest.approx(0.5)
    add_constraint(lp, {x: 1.0}, "<=", 0.5)
    assert solve(lp).objective == pytest.approx(0.5)


def test_cut_strictly_lowers_max():
    lp = LinearProgram("max")
    x = lp.add_variable(0.0, 2.0, 1.0)
    y = lp.add_variable(0.0, 2.0, 1.0)
    before = solve(lp)
    assert before.objective == pytest.approx(4.0)
    lp.add_constraint({x: 1.0, y: 2.0}, "<=", 3.0)
    after = solve(lp)
    assert after.objective < before.objective - 1e-9
    assert after.objective == pytest.approx(lp_vertex_optimum([1, 1], [[1, 2], [1, 0], [0, 1], [-1, 0], [0, -1]], [3, 2, 2, 0, 0]))


def test_add_variable_columns():
    # min master over two vertices of a toy polytope: x = sum lam_i v_i, sum lam = 1
    lp = LinearProgram("min")
    x = lp.add_variable(-math.inf, math.inf, 1.0)
    link = lp.add_constraint({x: 1.0}, "=", 0.0)
    conv = lp.add_constraint({}, "=", 1.0)
    add_variable(lp, (0.0, math.inf), 0.0, {link: -3.0, conv: 1.0})
    first = solve(lp)
    assert first.objective == pytest.approx(3.0)
    # null column
    lp.add_variable(0.0, math.inf, 0.0)
    assert solve(lp).objective == pytest.approx(3.0)
    # zero reduced cost: the same vertex again
    add_variable(lp, (0.0, math.inf), 0.0, {link: -3.0, conv: 1.0})
    assert solve(lp).objective == pytest.approx(3.0)
    # negative reduced cost column: vertex 1
    sol = solve(lp)
    rc = 0.0 - (sol.duals[link] * -1.0 + sol.duals[conv])
    assert rc < 0
    add_variable(lp, (0.0, math.inf), 0.0, {link: -1.0, conv: 1.0})
    assert solve(lp).objective <= first.objective
    assert solve(lp).objective == pytest.approx(1.0)


def test_row_indices_validated():
    lp = LinearProgram()
    with pytest.raises(IndexError):
        lp.add_constraint({3: 1.0}, "<=", 1.0)
    with pytest.raises(IndexError):
        lp.add_variable(0, 1, 0, {0: 1.0})
    with pytest.raises(ValueError):
        lp.add_variable(2, 1)


def test_resolve_is_stable():
    rng = np.random.default_rng(3)
    lp = LinearProgram("min")
    xs = [lp.add_variable(0, 5, float(c)) for c in rng.normal(size=4)]
    for _ in range(5):
        lp.add_constraint({x: float(a) for x, a in zip(xs, rng.normal(size=4))}, "<=", 2.0)
    a, b = solve(lp), solve(lp)
    assert abs(a.objective - b.objective) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 4).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.integers(-5, 5), min_size=n, max_size=n),
    st.lists(st.lists(st.integers(-5, 5), min_size=n, max_size=n), min_size=1, max_size=6),
    st.lists(st.integers(0, 10), min_size=6, max_size=6),
)))
def test_matches_vertex_enumeration(data):
    n, c, rows, rhs = data
    lp = LinearProgram("max")
    for cj in c:
        lp.add_variable(0.0, 10.0, float(cj))
    for row, b in zip(rows, rhs):
        lp.add_constraint({j: float(a) for j, a in enumerate(row)}, "<=", float(b))
    sol = solve(lp)
    # the box keeps the LP bounded; b >= 0 keeps the origin feasible
    A = np.vstack([np.array(rows, dtype=float), np.eye(n), -np.eye(n)])
    b = np.concatenate([rhs[: len(rows)], np.full(n, 10.0), np.zeros(n)])
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(lp_vertex_optimum(c, A, b), abs=1e-8)
    # strong duality and complementary slackness
    assert abs(dual_objective(lp, sol) - sol.objective) <= DUALITY_TOL
    slack = np.asarray(lp.rhs) - lp.matrix() @ sol.primal
    assert np.all(np.abs(sol.duals) * np.abs(slack) <= 1e-6 * (1 + np.abs(lp.rhs)))


def test_min_sense_duals_and_ge_rows():
    lp = LinearProgram("min")
    x = lp.add_variable(0, math.inf, 2.0)
    y = lp.add_variable(0, math.inf, 3.0)
    r = lp.add_constraint({x: 1.0, y: 1.0}, ">=", 4.0)
    sol = solve(lp)
    assert sol.objective == pytest.approx(8.0)
    assert sol.duals[r] == pytest.approx(2.0)  # d obj / d rhs
    assert abs(dual_objective(lp, sol) - sol.objective) <= DUALITY_TOL


def test_solver_without_verdict_falls_back(caplog):
    # a separation LP on which the dual simplex without presolve ends in status "unknown"
    rows = [
        [1, 1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0, 0], [1, 1, 1, 0, 0, 0, 13],
        [1, 1, 1, 1, 0, 0, 15], [1, 1, 1, 1, 1, 0, 33], [1, 1, 1, 1, 1, 1, 45], [1, 1, 0, 1, 0, 0, 0],
        [1, 1, 0, 1, 1, 0, 15], [0, 0, 0, 0, 1, 1, 5], [0, 0, 1, 0, 1, 0, 11], [1, 0, 0, 0, 0, 1, 5],
    ]
    lp = LinearProgram("max")
    cost = [1.0, 1.0, 0.0, 1.0, 0.16666666666666663, 0.0, 0.0]
    for j, cj in enumerate(cost):
        lp.add_variable(-math.inf, 0.0 if j == 6 else math.inf, cj)
    pi0 = lp.add_variable(-math.inf, math.inf, -1.0)
    lp.add_constraint({3: 1.0, 4: 0.16666666666666663}, "<=", 1.0)
    for row in rows:
        r = {j: float(a) for j, a in enumerate(row) if a}
        r[pi0] = -1.0
        lp.add_constraint(r, "<=", 0.0)
    with caplog.at_level("WARNING", logger="dwfenchel.lp_core"):
        sol = solve(lp)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0)
    assert abs(dual_objective(lp, sol) - sol.objective) <= DUALITY_TOL
