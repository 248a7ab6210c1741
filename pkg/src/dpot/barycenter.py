"""Vertex-restricted Wasserstein-1 barycenters of empirical score distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sps

from .core import EmpiricalDistribution, vertex_costs
from .errors import InvalidInputError, SolverError
from .lp import LinearProgram, solve_lp

PLAN_TOL = 1e-8


@dataclass(frozen=True)
class CouplingPlan:
    """Coupling of one group's empirical distribution with the barycenter.

    ``gamma[s, i]`` is the mass moved from atom ``s`` to vertex ``e_i``.
    """

    group: int
    gamma: np.ndarray

    @property
    def row_mass(self) -> np.ndarray:
        return self.gamma.sum(axis=1)

    @property
    def column_mass(self) -> np.ndarray:
        return self.gamma.sum(axis=0)

    def transport_cost(self, dist: EmpiricalDistribution) -> float:
        return float(np.sum(vertex_costs(dist.support) * self.gamma))


@dataclass(frozen=True)
class BarycenterResult:
    q: np.ndarray
    plans: tuple
    objective: float
    weights: np.ndarray
    lp_objective: float = float("nan")


def check_weights(weights, m: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != m:
        raise InvalidInputError(f"expected {m} group weights, got {len(w)}")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or not np.any(w > 0):
        raise InvalidInputError("weights must be finite, nonnegative and not all zero")
    return w


def group_weights(policy: Union[str, Sequence[float]], sizes) -> np.ndarray:
    """Resolve a weight policy: ``"balanced"`` (1/m), ``"counts"`` (n_a / n), or explicit values."""
    sizes = np.asarray(sizes, dtype=float)
    m = len(sizes)
    if isinstance(policy, str):
        if policy == "balanced":
            return np.full(m, 1.0 / m)
        if policy == "counts":
            return sizes / sizes.sum()
        raise InvalidInputError(f"unknown weight policy {policy!r}")
    return check_weights(policy, m)


def _check_dists(dists: Sequence[EmpiricalDistribution]) -> int:
    if len(dists) == 0:
        raise InvalidInputError("need at least one group")
    ks = {d.k for d in dists}
    if len(ks) != 1:
        raise InvalidInputError(f"groups disagree on the number of classes: {sorted(ks)}")
    return ks.pop()


def build_opt_lp(dists: Sequence[EmpiricalDistribution], weights) -> LinearProgram:
    """Assemble the barycenter program over per-group couplings.

    Variables are ``gamma_a[s, i]`` laid out group by group, row-major. The
    rows are, in order: one marginal row per atom of every group, ``k`` column
    agreement rows between group 0 and each other group, and one total-mass row.
    """
    k = _check_dists(dists)
    m = len(dists)
    w = check_weights(weights, m)
    sizes = [len(d) for d in dists]
    offsets = np.concatenate([[0], np.cumsum(sizes)]) * k
    n_vars = int(offsets[-1])
    n_atoms = int(sum(sizes))
    n_eq = n_atoms + k * (m - 1) + 1

    c = np.concatenate([w[a] * vertex_costs(d.support).ravel() for a, d in enumerate(dists)])
    rows, cols, vals = [], [], []

    # atom marginals
    var = np.arange(n_vars)
    rows.append(var // k)
    cols.append(var)
    vals.append(np.ones(n_vars))

    # column agreement: sum_s gamma_0[s, y] - sum_s gamma_a[s, y] = 0
    r0 = n_atoms
    base = np.arange(offsets[1])
    for a in range(1, m):
        row_ids = r0 + (a - 1) * k
        rows.append(row_ids + base % k)
        cols.append(base)
        vals.append(np.ones(len(base)))
        own = np.arange(offsets[a], offsets[a + 1])
        rows.append(row_ids + (own - offsets[a]) % k)
        cols.append(own)
        vals.append(-np.ones(len(own)))

    rows.append(np.full(len(base), n_eq - 1))
    cols.append(base)
    vals.append(np.ones(len(base)))

    A = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(n_eq, n_vars))
    b = np.concatenate([np.concatenate([d.mass for d in dists]), np.zeros(k * (m - 1)), [1.0]])
    return LinearProgram(c, A, b)


def solve_barycenter(dists: Sequence[EmpiricalDistribution], weights) -> BarycenterResult:
    """Solve the barycenter program and split the solution into per-group plans.

    The barycenter is read off group 0's plan; every other plan's column
    marginals must agree with it to ``PLAN_TOL``.
    """
    lp = build_opt_lp(dists, weights)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise SolverError(f"barycenter program reported {sol.status}")
    k = dists[0].k
    w = np.asarray(weights, dtype=float)
    plans, pos = [], 0
    for a, d in enumerate(dists):
        size = len(d) * k
        plans.append(CouplingPlan(a, sol.x[pos:pos + size].reshape(len(d), k)))
        pos += size
    q = plans[0].column_mass
    for plan, d in zip(plans, dists):
        drift = float(np.max(np.abs(plan.column_mass - q)))
        rdrift = float(np.max(np.abs(plan.row_mass - d.mass)))
        if drift > PLAN_TOL or rdrift > PLAN_TOL:
            raise SolverError(f"plan of group {plan.group} violates its marginals",
                              {"column_drift": drift, "row_drift": rdrift})
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    objective = float(sum(w[a] * p.transport_cost(d) for a, (p, d) in enumerate(zip(plans, dists))))
    return BarycenterResult(q, tuple(plans), objective, w, sol.objective_value)


def tv_barycenter(pmfs, weights):
    """Minimize ``sum_a w_a * d_TV(p_a, q)`` over class distributions ``q``.

    Solved as a linear program with the absolute values split into positive
    and negative parts. Returns ``(q, cost)``.
    """
    P = np.atleast_2d(np.asarray(pmfs, dtype=float))
    m, k = P.shape
    w = check_weights(weights, m)
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidInputError("class pmfs must be nonnegative and sum to 1")
    # variables: q (k), pos (m*k), neg (m*k); q_i + pos_ai - neg_ai = p_ai
    mk = m * k
    c = np.concatenate([np.zeros(k), np.repeat(0.5 * w, k), np.repeat(0.5 * w, k)])
    eye_q = sps.vstack([sps.identity(k)] * m)
    A = sps.vstack([
        sps.hstack([eye_q, sps.identity(mk), -sps.identity(mk)]),
        sps.hstack([sps.csr_matrix(np.ones((1, k))), sps.csr_matrix((1, 2 * mk))]),
    ])
    b = np.concatenate([P.ravel(), [1.0]])
    sol = solve_lp(LinearProgram(c, A, b))
    if not sol.optimal:
        raise SolverError(f"TV-barycenter program reported {sol.status}")
    q = np.clip(sol.x[:k], 0.0, None)
    q = q / q.sum()
    cost = float(np.sum(w * 0.5 * np.abs(P - q).sum(axis=1)))
    return q, cost
