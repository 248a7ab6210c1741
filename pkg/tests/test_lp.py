import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given
from hypothesis import strategies as st

from dpot.errors import InvalidInputError
from dpot.lp import INFEASIBLE, UNBOUNDED, LinearProgram, primal_residual, solve_lp

from helpers import transport_bfs_cost


def transport_lp(supply, demand, cost):
    n, k = np.shape(cost)
    A = sps.vstack([sps.kron(sps.identity(n), np.ones((1, k))), sps.kron(np.ones((1, n)), sps.identity(k))])
    return LinearProgram(np.ravel(cost), A, np.concatenate([supply, demand]))


def test_constant_objective():
    sol = solve_lp(LinearProgram([1.0, 1.0], [[1.0, 1.0]], [1.0]))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(1.0)
    assert np.all(sol.x >= 0)


def test_infeasible_reported():
    sol = solve_lp(LinearProgram([0.0], [[1.0]], [-1.0]))
    assert sol.status == INFEASIBLE
    assert sol.x is None


def test_unbounded_reported():
    sol = solve_lp(LinearProgram([-1.0, 0.0], [[0.0, 1.0]], [1.0]))
    assert sol.status == UNBOUNDED


def test_small_transport_matches_vertex_enumeration():
    supply, demand, cost = [0.6, 0.4], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]]
    ref = transport_bfs_cost(supply, demand, cost)
    sol = solve_lp(transport_lp(supply, demand, cost))
    assert ref == pytest.approx(0.1)
    assert sol.objective_value == pytest.approx(ref, rel=1e-8)


@given(st.integers(1, 3), st.integers(2, 3), st.integers(1, 12), st.integers(0, 2**31))
def test_random_transport_against_enumeration(n, k, den, seed):
    rng = np.random.default_rng(seed)
    supply = (rng.multinomial(den, np.ones(n) / n) + 1) / (den + n)
    demand = (rng.multinomial(den, np.ones(k) / k) + 1) / (den + k)
    cost = rng.integers(0, 10, size=(n, k)) / 4.0
    p = transport_lp(supply, demand, cost)
    sol = solve_lp(p)
    assert sol.optimal
    assert sol.objective_value == pytest.approx(transport_bfs_cost(supply, demand, cost), rel=1e-8, abs=1e-12)
    assert primal_residual(p, sol.x) <= 1e-8 * (1 + np.abs(p.b).max())
    assert np.all(sol.x >= -1e-10)
    assert abs(sol.objective_value - sol.dual_objective) <= 1e-7 * (1 + abs(sol.objective_value))


def test_bounds_respected():
    # min -x1 - x2 with x1 + x2 + s = 3, x <= 1 on the first two
    p = LinearProgram([-1.0, -1.0, 0.0], [[1.0, 1.0, 1.0]], [3.0], upper=[1.0, 1.0, np.inf])
    sol = solve_lp(p)
    np.testing.assert_allclose(sol.x, [1.0, 1.0, 1.0], atol=1e-10)


def test_free_variables():
    # x1 = x2 - 2 with x2 >= 0: min x1 is -2, max x1 is unbounded
    sol = solve_lp(LinearProgram([1.0, 0.0], [[1.0, -1.0]], [-2.0], lower=[-np.inf, 0.0]))
    assert sol.objective_value == pytest.approx(-2.0)
    assert sol.x[0] == pytest.approx(-2.0)
    p = LinearProgram([-1.0, 0.0], [[1.0, -1.0]], [-2.0], lower=[-np.inf, 0.0])
    assert solve_lp(p).status == UNBOUNDED


def test_deterministic(rng):
    supply = rng.dirichlet(np.ones(30))
    demand = rng.dirichlet(np.ones(4))
    cost = rng.random((30, 4))
    p = transport_lp(supply, demand, cost)
    a, b = solve_lp(p), solve_lp(p)
    assert np.array_equal(a.x, b.x)


def test_ipm_path_matches_simplex(rng):
    supply = rng.dirichlet(np.ones(60))
    demand = rng.dirichlet(np.ones(3))
    cost = rng.random((60, 3))
    p = transport_lp(supply, demand, cost)
    a, b = solve_lp(p, method="simplex"), solve_lp(p, method="ipm")
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-8)
    assert np.count_nonzero(b.x > 1e-12) <= p.n_eq


def test_malformed_program():
    with pytest.raises(InvalidInputError):
        LinearProgram([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(InvalidInputError):
        LinearProgram([np.inf], [[1.0]], [1.0])
    with pytest.raises(InvalidInputError):
        solve_lp(LinearProgram([1.0], [[1.0]], [1.0]), method="magic")
