import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dpot.core import (EmpiricalDistribution, ScoredDataset, dedup_points, empirical_from_points,
                       empirical_from_scores, is_on_simplex, l1_vertex_cost, project_to_simplex)
from dpot.errors import EmptyGroupError, InvalidInputError, LabelsRequiredError

from helpers import grid_projection, simplex_points


def test_projection_keeps_simplex_point():
    assert np.array_equal(project_to_simplex([0.2, 0.8]), [0.2, 0.8])


def test_projection_clips_to_vertex():
    np.testing.assert_allclose(project_to_simplex([2.0, 0.0]), [1.0, 0.0], atol=1e-15)


def test_projection_matches_grid_search():
    p = project_to_simplex([0.6, 0.5, 0.2])
    ref = grid_projection([0.6, 0.5, 0.2])
    np.testing.assert_allclose(p, ref, atol=1e-4)
    assert is_on_simplex(p)


def test_projection_rejects_nonfinite_and_short():
    with pytest.raises(InvalidInputError):
        project_to_simplex([np.nan, 1.0])
    with pytest.raises(InvalidInputError):
        project_to_simplex([1.0])


def test_projection_rowwise():
    V = np.array([[2.0, 0.0], [0.2, 0.8], [-1.0, 3.0]])
    P = project_to_simplex(V)
    for v, p in zip(V, P):
        np.testing.assert_array_equal(p, project_to_simplex(v))


vectors = st.integers(2, 6).flatmap(
    lambda k: arrays(float, k, elements=st.floats(-5, 5, allow_nan=False)))


@given(vectors)
def test_projection_idempotent_and_on_simplex(v):
    p = project_to_simplex(v)
    assert is_on_simplex(p)
    assert np.array_equal(project_to_simplex(p), p)


@given(vectors, st.integers(0, 2**31))
def test_projection_is_nearest(v, seed):
    # no random simplex point is closer than the projection
    p = project_to_simplex(v)
    Q = np.random.default_rng(seed).dirichlet(np.ones(len(v)), size=200)
    assert np.linalg.norm(p - v) <= np.linalg.norm(Q - v, axis=1).min() + 1e-12


def test_vertex_cost_examples():
    assert l1_vertex_cost([0.0, 1.0, 0.0], 1) == 0.0
    assert l1_vertex_cost(np.full(4, 0.25), 2) == pytest.approx(2 * (1 - 0.25))
    s = np.array([0.7, 0.3])
    assert l1_vertex_cost(s, 0) == pytest.approx(np.abs(s - [1.0, 0.0]).sum())
    assert l1_vertex_cost(s, 0) == pytest.approx(0.6)


@given(simplex_points(), st.data())
def test_vertex_cost_equals_l1(s, data):
    i = data.draw(st.integers(0, len(s) - 1))
    e = np.zeros(len(s))
    e[i] = 1.0
    assert abs(l1_vertex_cost(s, i) - np.abs(s - e).sum()) <= 1e-12


def test_empirical_merges_duplicates():
    d = ScoredDataset.from_rows(["g", "g"], [[0.5, 0.5], [0.5, 0.5]])
    dist = empirical_from_scores(d, 0)
    np.testing.assert_array_equal(dist.support, [[0.5, 0.5]])
    np.testing.assert_array_equal(dist.mass, [1.0])


def test_empirical_uniform_masses():
    d = ScoredDataset.from_rows(["g", "g"], [[1, 0], [0, 1]])
    dist = empirical_from_scores(d, 0)
    assert len(dist) == 2
    np.testing.assert_array_equal(dist.mass, [0.5, 0.5])


def test_empirical_distinct_points(rng):
    S = rng.dirichlet(np.ones(3), size=6)
    dist = empirical_from_points(S)
    assert len(dist) == 6
    assert sum(dist.mass) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(dist.mass, 1 / 6)


def test_empirical_rounding_merges_atoms():
    dist = empirical_from_points([[0.301, 0.699], [0.304, 0.696], [0.9, 0.1]], round_digits=1)
    assert len(dist) == 2
    np.testing.assert_allclose(dist.mass, [2 / 3, 1 / 3])


def test_empirical_empty_group():
    d = ScoredDataset([0], [[0.5, 0.5]], [-1], ("a", "b"))
    with pytest.raises(EmptyGroupError):
        empirical_from_scores(d, 1)


@given(st.integers(1, 40), st.integers(2, 4), st.integers(0, 2**31))
def test_empirical_mass_and_support_size(n, k, seed):
    rng = np.random.default_rng(seed)
    # draw from a small pool so duplicates occur
    pool = rng.dirichlet(np.ones(k), size=5)
    S = pool[rng.integers(0, 5, size=n)]
    d = ScoredDataset.from_rows(["x"] * n, S)
    dist = empirical_from_scores(d, 0)
    assert abs(dist.mass.sum() - 1.0) <= 1e-12
    assert len(dist) <= n
    assert len({row.tobytes() for row in dist.support}) == len(dist)


def test_dedup_first_appearance_order():
    atoms, mass, inv = dedup_points([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [-0.0, 1.0]])
    np.testing.assert_array_equal(atoms, [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(mass, [0.75, 0.25])
    np.testing.assert_array_equal(inv, [0, 1, 0, 0])


def test_group_tokens_first_appearance():
    d = ScoredDataset.from_rows(["b", "a", "b"], np.full((3, 2), 0.5), [0, 1, None])
    assert d.group_names == ("b", "a")
    np.testing.assert_array_equal(d.groups, [0, 1, 0])
    assert d.m == 2 and d.k == 2 and not d.has_labels
    with pytest.raises(LabelsRequiredError):
        d.label_pmfs()


def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        ScoredDataset([0], [[0.5, 0.5]], [2], ("a",))
    with pytest.raises(InvalidInputError):
        ScoredDataset([1], [[0.5, 0.5]], [0], ("a",))
    with pytest.raises(InvalidInputError):
        EmpiricalDistribution([[1.0, 0.0]], [0.9])


def test_label_pmfs():
    d = ScoredDataset.from_rows(["a", "a", "b", "a"], np.full((4, 2), 0.5), [0, 1, 1, 0])
    np.testing.assert_allclose(d.label_pmfs(), [[2 / 3, 1 / 3], [0, 1]])
