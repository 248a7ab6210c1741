"""Brute-force references and synthetic score data.

Nothing here calls the LP solver: the barycenter reference searches a grid
of vertex distributions and evaluates each inner transport cost exactly from
the vertices of the transportation dual, so it can be compared against the
LP-based :func:`dpot.barycenter.solve_barycenter` without circularity.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .core import EmpiricalDistribution, ScoredDataset, project_to_simplex, vertex_costs
from .errors import InvalidInputError, RescalingError

MAX_DENOMINATOR = 12


# -- exact small transport problems ----------------------------------------

def rescale_masses(mass, max_den: int = MAX_DENOMINATOR):
    """Exact fractions for ``mass``; floats that are not ``p/q`` with ``q <= max_den`` are rejected."""
    out = []
    for x in np.asarray(mass, dtype=float):
        f = Fraction(float(x)).limit_denominator(max_den)
        if abs(float(f) - x) > 1e-12:
            raise RescalingError(f"mass {x!r} is not a fraction with denominator <= {max_den}")
        out.append(f)
    return out


def _integer_scale(*fracs):
    den = 1
    for f in itertools.chain(*fracs):
        den = den * f.denominator // math.gcd(den, f.denominator)
    return den, [[int(f * den) for f in group] for group in fracs]


def _tree_flows(edges, supply, demand):
    """Flows on a spanning tree of the bipartite graph, by peeling leaves."""
    n, k = len(supply), len(demand)
    left = list(supply)
    right = list(demand)
    adj = {("s", i): set() for i in range(n)}
    adj.update({("d", j): set() for j in range(k)})
    for i, j in edges:
        adj[("s", i)].add(j)
        adj[("d", j)].add(i)
    flow = {}
    remaining = set(edges)
    while remaining:
        leaf = next((node for node, nb in adj.items() if len(nb) == 1), None)
        if leaf is None:
            return None
        kind, idx = leaf
        other = next(iter(adj[leaf]))
        e = (idx, other) if kind == "s" else (other, idx)
        val = left[idx] if kind == "s" else right[idx]
        flow[e] = val
        if kind == "s":
            left[idx] -= val
            right[other] -= val
            adj[("d", other)].discard(idx)
        else:
            right[idx] -= val
            left[other] -= val
            adj[("s", other)].discard(idx)
        adj[leaf] = set()
        remaining.discard(e)
    if any(left) or any(right):
        return None
    return flow


def transport_cost_enumerated(support, mass, q, max_den: int = MAX_DENOMINATOR) -> float:
    """Exact simplex-to-vertex transport cost by enumerating basic feasible plans.

    Masses of both marginals are rescaled to integers; every spanning tree of
    the atom/vertex bipartite graph is tried and the cheapest nonnegative tree
    flow wins. Exponential; meant for a handful of atoms.
    """
    S = np.asarray(support, dtype=float)
    n, k = S.shape
    r = rescale_masses(mass, max_den)
    qq = [Fraction(float(x)).limit_denominator(10 ** 6) for x in np.asarray(q, dtype=float)]
    if sum(r) != 1 or sum(qq) != 1:
        raise RescalingError("marginals must each sum to exactly 1 after rescaling")
    den, (ri, qi) = _integer_scale(r, qq)
    cost = vertex_costs(S)
    cells = [(i, j) for i in range(n) for j in range(k)]
    best = math.inf
    for edges in itertools.combinations(cells, n + k - 1):
        flow = _tree_flows(edges, ri, qi)
        if flow is None or any(v < 0 for v in flow.values()):
            continue
        best = min(best, sum(cost[i, j] * v for (i, j), v in flow.items()) / den)
    return best


def dual_potentials(dist: EmpiricalDistribution) -> np.ndarray:
    """Candidate vertex potentials ``v`` (gauge ``v_0 = 0``) of the transport dual.

    Every basic dual solution ties the vertex potentials together along a
    spanning tree on the ``k`` vertices whose edges pass through an atom
    ``s``, giving ``v_j - v_i = c(s, j) - c(s, i)``. All such trees and atom
    labels are enumerated.
    """
    C = vertex_costs(dist.support)
    n, k = C.shape
    out = []
    for tree in _spanning_trees(k):
        for labels in itertools.product(range(n), repeat=len(tree)):
            v = np.full(k, np.nan)
            v[0] = 0.0
            pending = list(zip(tree, labels))
            while pending:
                rest = []
                for (i, j), s in pending:
                    if not np.isnan(v[i]) and np.isnan(v[j]):
                        v[j] = v[i] + C[s, j] - C[s, i]
                    elif not np.isnan(v[j]) and np.isnan(v[i]):
                        v[i] = v[j] + C[s, i] - C[s, j]
                    elif np.isnan(v[i]) and np.isnan(v[j]):
                        rest.append(((i, j), s))
                pending = rest
            out.append(v)
    return np.unique(np.array(out), axis=0)


def _spanning_trees(k: int):
    edges = list(itertools.combinations(range(k), 2))
    for subset in itertools.combinations(edges, k - 1):
        parent = list(range(k))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for i, j in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            yield subset


def transport_cost_dual(dist: EmpiricalDistribution, Q, potentials: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact transport cost from ``dist`` to each row of ``Q`` (vertex pmfs)."""
    V = dual_potentials(dist) if potentials is None else potentials
    C = vertex_costs(dist.support)
    # u_s = min_i c(s, i) - v_i for each candidate
    U = (C[None, :, :] - V[:, None, :]).min(axis=2)
    base = U @ dist.mass
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return (base[None, :] + Q @ V.T).max(axis=1)


def simplex_grid(k: int, step: float) -> np.ndarray:
    N = int(round(1.0 / step))
    if abs(N * step - 1.0) > 1e-9:
        raise InvalidInputError("grid step must divide 1")
    pts = [c for c in itertools.product(range(N + 1), repeat=k - 1) if sum(c) <= N]
    P = np.array([list(c) + [N - sum(c)] for c in pts], dtype=float)
    return P / N


def _local_grid(center, half_width: float, step: float) -> np.ndarray:
    k = len(center)
    ticks = np.arange(-half_width, half_width + step / 2, step)
    pts = np.array(list(itertools.product(ticks, repeat=k - 1)))
    Q = np.column_stack([center[:-1] + pts, center[-1] - pts.sum(axis=1)])
    return Q[np.all(Q >= -1e-15, axis=1)].clip(min=0.0)


def brute_barycenter(dists: Sequence[EmpiricalDistribution], weights, grid_step: Optional[float] = None,
                     refine: int = 0, max_den: int = MAX_DENOMINATOR):
    """Grid-search reference for the weighted barycenter objective.

    Every ``q`` on the simplex grid of spacing ``grid_step`` (default 1e-3
    for k=2, 5e-3 for k=3) is scored exactly. ``refine`` extra rounds zoom
    in around the incumbent at a tenth of the spacing. Each grid value is a
    feasible objective, so the result never undercuts the true minimum.

    Returns ``(objective, q)``.
    """
    k = dists[0].k
    if k > 3 or any(len(d) > 6 for d in dists):
        raise InvalidInputError("brute-force reference is limited to k <= 3 and 6 atoms per group")
    for d in dists:
        rescale_masses(d.mass, max_den)
    w = np.asarray(weights, dtype=float)
    step = grid_step or (1e-3 if k == 2 else 5e-3)
    pots = [dual_potentials(d) for d in dists]

    def total(Q):
        return sum(w[a] * transport_cost_dual(d, Q, pots[a]) for a, d in enumerate(dists))

    Q = simplex_grid(k, step)
    vals = total(Q)
    best = int(np.argmin(vals))
    q, obj = Q[best], float(vals[best])
    for _ in range(refine):
        Q = _local_grid(q, 2 * step, step / 10)
        vals = total(Q)
        best = int(np.argmin(vals))
        if vals[best] < obj:
            q, obj = Q[best], float(vals[best])
        step /= 10
    return obj, q


# -- synthetic data --------------------------------------------------------

@dataclass(frozen=True)
class GroupMixture:
    """Mixture of Dirichlet components for one group.

    A zero concentration pins that coordinate to 0, so components may live on
    faces or at vertices of the simplex.
    """

    weights: tuple
    alphas: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        A = np.atleast_2d(np.asarray(self.alphas, dtype=float))
        if len(w) != len(A) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError("component weights must be nonnegative and sum to 1")
        if np.any(A < 0) or np.any(A.sum(axis=1) <= 0) or not np.all(np.isfinite(A)):
            raise InvalidInputError("concentrations must be nonnegative with a positive entry")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        A = np.atleast_2d(np.asarray(self.alphas, dtype=float))
        comp = rng.choice(len(A), size=n, p=np.asarray(self.weights, dtype=float))
        alpha = A[comp]
        g = np.zeros_like(alpha)
        live = alpha > 0
        g[live] = rng.standard_gamma(alpha[live])
        s = g / g.sum(axis=1, keepdims=True)
        return s


@dataclass(frozen=True)
class SyntheticSpec:
    k: int
    groups: tuple
    sizes: tuple
    seed: int = 0

    @property
    def m(self) -> int:
        return len(self.groups)

    def with_sizes(self, sizes, seed: Optional[int] = None) -> "SyntheticSpec":
        if isinstance(sizes, int):
            sizes = (sizes,) * self.m
        return SyntheticSpec(self.k, self.groups, tuple(sizes), self.seed if seed is None else seed)


def default_spec(k: int = 3, m: int = 2, n: int = 1000, seed: int = 0, components: int = 2) -> SyntheticSpec:
    """Continuous two-component Dirichlet mixtures that differ by group.

    Group ``a`` leans toward class ``a mod k`` so label rates differ across
    groups. The mixture parameters depend only on ``(k, m, components)``;
    ``seed`` seeds the draws.
    """
    rng = np.random.default_rng([k, m, components])
    groups = []
    for a in range(m):
        alphas = 0.7 + 2.3 * rng.random((components, k))
        alphas[:, a % k] += 1.5
        w = rng.dirichlet(np.full(components, 4.0))
        groups.append(GroupMixture(tuple(w), tuple(map(tuple, alphas))))
    return SyntheticSpec(k, tuple(groups), (n,) * m, seed)


def sample_labels(S, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(S, axis=1)
    u = rng.random(len(S))[:, None] * cdf[:, -1:]
    return np.minimum((u >= cdf).sum(axis=1), S.shape[1] - 1)


def generate(spec: SyntheticSpec, stream: int = 0) -> ScoredDataset:
    """Scores from the group mixtures with labels drawn from ``Categorical(score)``.

    Scores are therefore calibrated: they are the Bayes class probabilities.
    ``stream`` selects an independent draw under the same seed.
    """
    rng = np.random.default_rng([spec.seed, stream])
    scores, groups, labels = [], [], []
    for a, (mix, n) in enumerate(zip(spec.groups, spec.sizes)):
        S = mix.sample(int(n), rng)
        scores.append(S)
        labels.append(sample_labels(S, rng))
        groups.append(np.full(int(n), a))
    names = tuple(f"g{a}" for a in range(spec.m))
    return ScoredDataset(np.concatenate(groups), np.vstack(scores), np.concatenate(labels), names)


def perturb_scores(S, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Move each score by a random zero-sum direction of ℓ1 size ``delta``, then project."""
    S = np.asarray(S, dtype=float)
    d = rng.standard_normal(S.shape)
    d -= d.mean(axis=1, keepdims=True)
    d *= delta / np.abs(d).sum(axis=1, keepdims=True)
    return project_to_simplex(S + d)


# -- generalization harness ------------------------------------------------

class GeneralizationReport(NamedTuple):
    rows: List[dict]
    summary: List[dict]
    slope: float
    reference_error: float


def _reference_error(spec: SyntheticSpec, n: int) -> float:
    from .barycenter import solve_barycenter
    from .core import empirical_from_points

    data = generate(spec.with_sizes(n, seed=spec.seed + 7_919), stream=3)
    dists = [empirical_from_points(data.scores[data.groups == a]) for a in range(spec.m)]
    return 0.5 * solve_barycenter(dists, np.ones(spec.m)).objective


def _cell(args):
    spec, n, seed, holdout_n, mode, err_star = args
    from .metrics import dp_gap_from_pmfs, expected_error_rates
    from .pipeline import apply, fit

    cell_seed = spec.seed * 100_003 + seed
    train = generate(spec.with_sizes(n, seed=cell_seed), stream=1)
    model = fit(train, mode=mode, seed=seed)
    hold = generate(spec.with_sizes(holdout_n, seed=cell_seed), stream=2)
    pred = apply(model, hold, seed=seed)
    counts = np.zeros((spec.m, spec.k))
    np.add.at(counts, hold.groups, pred.pmfs)
    gap = dp_gap_from_pmfs(counts / counts.sum(axis=1, keepdims=True))
    err = expected_error_rates(hold.groups, pred.pmfs, hold.scores, spec.m).sum()
    return {"n": n, "seed": seed, "dp_gap": gap, "excess_error": float(err - err_star)}


def generalization_run(spec: SyntheticSpec, n_list: Sequence[int], holdout_n: int,
                       seeds: Sequence[int], mode: str = "nn", reference_n: Optional[int] = None,
                       workers: int = 1) -> GeneralizationReport:
    """Holdout DP gap and excess error of fitted post-processors as the sample grows.

    For every ``(n, seed)`` cell a model is fit on ``n`` rows per group and
    scored on a fresh holdout of ``holdout_n`` rows per group. Excess error is
    the holdout sum of group error rates minus a reference minimum fair error
    (half the unit-weight barycenter objective on ``reference_n`` rows per
    group, default ``max(n_list)``). ``slope`` is the least-squares slope of
    log mean DP gap against log n.
    """
    err_star = _reference_error(spec, reference_n or max(n_list))
    cells = [(spec, int(n), int(s), int(holdout_n), mode, err_star) for n in n_list for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell, cells))
    else:
        rows = [_cell(c) for c in cells]
    summary = []
    for n in n_list:
        sel = [r for r in rows if r["n"] == n]
        summary.append({"n": int(n),
                        "dp_gap": float(np.mean([r["dp_gap"] for r in sel])),
                        "excess_error": float(np.mean([r["excess_error"] for r in sel]))})
    slope = float("nan")
    if len(n_list) >= 2 and spec.m >= 2:
        x = np.log([s["n"] for s in summary])
        y = np.log([max(s["dp_gap"], 1e-300) for s in summary])
        slope = float(np.polyfit(x, y, 1)[0])
    return GeneralizationReport(rows, summary, slope, err_star)


def write_report_csv(report: GeneralizationReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["n", "seed", "dp_gap", "excess_error"])
        writer.writeheader()
        for row in report.rows:
            writer.writerow({key: (format(val, ".10g") if isinstance(val, float) else val)
                             for key, val in row.items()})
