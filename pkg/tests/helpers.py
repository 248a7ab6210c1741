"""Small independent references shared by the tests."""

import itertools

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dpot.core import EmpiricalDistribution


def grid_projection(v, step=1e-4):
    """Euclidean-nearest point of the 3-simplex by exhaustive grid search."""
    v = np.asarray(v, dtype=float)
    N = int(round(1 / step))
    i = np.arange(N + 1)
    a, b = np.meshgrid(i, i, indexing="ij")
    ok = a + b <= N
    P = np.column_stack([a[ok], b[ok], N - a[ok] - b[ok]]) / N
    return P[np.argmin(((P - v) ** 2).sum(axis=1))]


def transport_bfs_cost(supply, demand, cost):
    """Minimum cost of a small transportation problem over its basic feasible solutions.

    Enumerates every choice of n + k - 1 cells, solves the square marginal
    system on those cells and keeps nonnegative solutions.
    """
    supply, demand, cost = map(lambda x: np.asarray(x, dtype=float), (supply, demand, cost))
    n, k = cost.shape
    cells = list(itertools.product(range(n), range(k)))
    rhs = np.concatenate([supply, demand])
    best = np.inf
    for basis in itertools.combinations(cells, n + k - 1):
        M = np.zeros((n + k, len(basis)))
        for c, (i, j) in enumerate(basis):
            M[i, c] = 1.0
            M[n + j, c] = 1.0
        x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.allclose(M @ x, rhs, atol=1e-12) and np.all(x >= -1e-12):
            best = min(best, sum(cost[i, j] * x[c] for c, (i, j) in enumerate(basis)))
    return best


def random_dist(rng, k, n_atoms, den=None):
    S = rng.dirichlet(np.ones(k), size=n_atoms)
    if den is None:
        mass = np.full(n_atoms, 1.0 / n_atoms)
    else:
        counts = rng.multinomial(den - n_atoms, np.ones(n_atoms) / n_atoms) + 1
        mass = counts / den
    return EmpiricalDistribution(S, mass)


def simplex_points(k_min=2, k_max=5):
    @st.composite
    def _draw(draw):
        k = draw(st.integers(k_min, k_max))
        raw = draw(arrays(float, k, elements=st.floats(0.0, 1.0, allow_nan=False)))
        if raw.sum() == 0:
            raw[0] = 1.0
        return raw / raw.sum()
    return _draw()


# acceptance results, printed in the terminal summary
ACCEPTANCE = []


def record(criterion: str, ok, detail: str) -> None:
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    line = f"[{status}] criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
