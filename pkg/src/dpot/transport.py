"""Per-group transport maps from score space to the simplex vertices.

Three kinds of maps are built from a barycenter coupling:

* :class:`LookupTransport` -- the coupling's conditional rows as a table,
  exact on the fitted support (finite score distributions).
* :class:`NnTransport` -- an offset nearest-vertex rule
  ``s -> argmin_i 2 (1 - s_i) - psi_i`` whose decision boundaries are centered
  at a point found from the coupling's boundary offsets (continuous scores).
* smoothing -- Laplace-perturbed inputs fed to an ``NnTransport`` (scores
  with atoms and continuous parts mixed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sps

from .barycenter import CouplingPlan
from .core import EmpiricalDistribution
from .errors import DegenerateAtomError, GeometryInfeasibleError, InvalidInputError, SolverError
from .lp import LinearProgram, solve_lp

MARGIN_FLOOR = -1e-6
KERNEL_TOL = 1e-10
TIE_TOL = 1e-12


@dataclass(frozen=True)
class LookupTransport:
    support: np.ndarray
    kernel: np.ndarray
    round_digits: Optional[int] = None
    fallback: str = "nearest-l1"

    def __post_init__(self):
        K = np.asarray(self.kernel, dtype=float)
        S = np.asarray(self.support, dtype=float)
        if K.shape != S.shape:
            raise InvalidInputError("kernel must have one row of length k per support atom")
        if np.any(K < 0) or np.any(np.abs(K.sum(axis=1) - 1.0) > KERNEL_TOL):
            raise InvalidInputError("kernel rows must be probability vectors")
        object.__setattr__(self, "kernel", K)
        object.__setattr__(self, "support", S)
        object.__setattr__(self, "_index", {row.tobytes(): i for i, row in reversed(list(enumerate(S + 0.0)))})

    @property
    def k(self) -> int:
        return self.support.shape[1]

    def locate(self, points) -> np.ndarray:
        """Support atom used for each point: exact match, else nearest in ℓ1.

        Ties in the nearest-atom fallback (distances within ``TIE_TOL``) go
        to the earliest atom.
        """
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if self.round_digits is not None:
            P = np.round(P, self.round_digits)
        P = P + 0.0
        out = np.empty(len(P), dtype=np.int64)
        for r, row in enumerate(P):
            hit = self._index.get(row.tobytes())
            if hit is None:
                d = np.abs(self.support - row).sum(axis=1)
                # distances equal up to rounding count as ties
                hit = int(np.flatnonzero(d <= d.min() + TIE_TOL)[0])
            out[r] = hit
        return out

    def rows(self, points) -> np.ndarray:
        return self.kernel[self.locate(points)]


@dataclass(frozen=True)
class NnTransport:
    """Offset nearest-vertex map; ``psi[0]`` is pinned to 0."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float).reshape(-1)
        if len(psi) < 2 or not np.all(np.isfinite(psi)):
            raise InvalidInputError("psi must be a finite vector of length k >= 2")
        object.__setattr__(self, "psi", psi - psi[0])

    @property
    def k(self) -> int:
        return len(self.psi)

    def center(self) -> np.ndarray:
        """Point on ``sum(z) = 1`` where all offset costs tie."""
        c = -self.psi / 2.0
        return c + (1.0 - c.sum()) / self.k


@dataclass(frozen=True)
class CenterPoint:
    z: np.ndarray
    margin: float


@dataclass(frozen=True)
class SmoothingConfig:
    epsilon: float
    fit_draws: int = 10
    eval_draws: int = 100

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise InvalidInputError("smoothing epsilon must be positive")
        if self.fit_draws < 1 or self.eval_draws < 1:
            raise InvalidInputError("smoothing draw counts must be >= 1")

    @classmethod
    def default(cls, k: int) -> "SmoothingConfig":
        return cls(0.2 / k)


def lookup_from_plan(plan: CouplingPlan, dist: EmpiricalDistribution,
                     round_digits: Optional[int] = None) -> LookupTransport:
    gamma = np.clip(plan.gamma, 0.0, None)
    row = gamma.sum(axis=1)
    bad = np.flatnonzero(row <= 0)
    if len(bad):
        raise DegenerateAtomError(f"atom {int(bad[0])} of group {plan.group} carries no mass")
    kernel = gamma / row[:, None]
    kernel /= kernel.sum(axis=1, keepdims=True)
    return LookupTransport(dist.support, kernel, round_digits)


def apply_lookup(tmap: LookupTransport, s, rng: np.random.Generator) -> int:
    row = tmap.rows(s)[0]
    return sample_class(row, rng)


def sample_class(pmf, rng: np.random.Generator) -> int:
    cdf = np.cumsum(pmf)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def extract_boundaries(plan: CouplingPlan, dist: EmpiricalDistribution,
                       tol_mass: Optional[float] = None) -> np.ndarray:
    """Boundary offsets of the regions each vertex receives mass from.

    ``B[i, j] = max(0, max{s_j - s_i + 1 : gamma(s, e_i) > tol_mass})``.
    The default threshold is ``1e-9 * max atom mass``, which ignores LP dust.
    """
    S = dist.support
    k = S.shape[1]
    if tol_mass is None:
        tol_mass = 1e-9 * float(dist.mass.max())
    B = np.zeros((k, k))
    for i in range(k):
        sent = plan.gamma[:, i] > tol_mass
        if np.any(sent):
            Si = S[sent]
            B[i] = np.maximum((Si - Si[:, [i]]).max(axis=0) + 1.0, 0.0)
        B[i, i] = 0.0
    return B


def _pairs(k):
    return [(i, j) for i in range(k) for j in range(k) if i != j]


def find_center(B) -> CenterPoint:
    """Center point for the decision boundaries given boundary offsets ``B``.

    Maximizes the smallest slack ``t`` of ``z_j - z_i >= B[i, j] - 1 + t``
    over ``sum(z) = 1``. The remaining freedom is spent lexicographically:
    constraints the LP duals show to be blocking are frozen at the current
    level and the smallest remaining slack is maximized again, until every
    constraint is frozen. The reported margin is the first-stage ``t``.

    Raises
    ------
    GeometryInfeasibleError
        If the best achievable margin is below ``-1e-6``.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    if k < 2 or B.shape != (k, k):
        raise InvalidInputError("boundary matrix must be square with k >= 2")
    pairs = _pairs(k)
    n_c = len(pairs)
    level = {}  # frozen constraint -> required slack
    margin = None
    z = np.full(k, 1.0 / k)
    while len(level) < n_c:
        active = [c for c in range(n_c) if c not in level]
        # variables: z (k, free), t (free), slack per constraint (>= 0)
        n_vars = k + 1 + n_c
        rows, cols, vals = [], [], []
        b = np.empty(n_c + 1)
        for c, (i, j) in enumerate(pairs):
            rows += [c, c, c]
            cols += [j, i, k + 1 + c]
            vals += [1.0, -1.0, -1.0]
            if c in level:
                b[c] = B[i, j] - 1.0 + level[c]
            else:
                rows.append(c)
                cols.append(k)
                vals.append(-1.0)
                b[c] = B[i, j] - 1.0
        rows += [n_c] * k
        cols += list(range(k))
        vals += [1.0] * k
        b[n_c] = 1.0
        A = sps.csr_matrix((vals, (rows, cols)), shape=(n_c + 1, n_vars))
        c_obj = np.zeros(n_vars)
        c_obj[k] = -1.0
        lower = np.concatenate([np.full(k + 1, -np.inf), np.zeros(n_c)])
        sol = solve_lp(LinearProgram(c_obj, A, b, lower))
        if not sol.optimal:
            raise SolverError(f"center program reported {sol.status}")
        t = float(sol.x[k])
        z = sol.x[:k]
        if margin is None:
            margin = t
            if margin < MARGIN_FLOOR:
                raise GeometryInfeasibleError(
                    f"boundary halfspaces do not intersect (margin {margin:.3e})", margin=margin)
        blocking = [c for c in active if abs(sol.eq_duals[c]) > 1e-9]
        if not blocking:
            slack = sol.x[k + 1:]
            blocking = [c for c in active if slack[c] <= 1e-9]
        if not blocking:
            blocking = active
        for c in blocking:
            level[c] = t
            i, j = pairs[c]
            rev = pairs.index((j, i))
            if rev not in level:
                # the reverse slack is fixed by this pair's total; it stays >= t
                level[rev] = t
    return CenterPoint(np.asarray(z, dtype=float), float(margin))


def psi_from_center(center) -> NnTransport:
    z = np.asarray(center.z if isinstance(center, CenterPoint) else center, dtype=float)
    return NnTransport(2.0 * (z[0] - z))


def nn_costs(tmap: NnTransport, points) -> np.ndarray:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    return 2.0 * (1.0 - P) - tmap.psi


def evaluate_nn(tmap: NnTransport, points):
    """Vertex index chosen for each point (smallest index on exact ties)."""
    arr = np.asarray(points, dtype=float)
    out = np.argmin(nn_costs(tmap, arr), axis=1)
    return int(out[0]) if arr.ndim == 1 else out


def nn_from_plan(plan: CouplingPlan, dist: EmpiricalDistribution,
                 tol_mass: Optional[float] = None):
    """Extract an ``NnTransport`` from a coupling. Returns ``(map, center)``."""
    B = extract_boundaries(plan, dist, tol_mass)
    center = find_center(B)
    return psi_from_center(center), center


def count_disagreements(tmap: NnTransport, plan: CouplingPlan, dist: EmpiricalDistribution) -> int:
    """Atoms whose coupling mass is not entirely on the vertex the map picks."""
    picks = evaluate_nn(tmap, dist.support)
    kept = plan.gamma[np.arange(len(dist)), picks]
    return int(np.count_nonzero(kept < plan.row_mass - 1e-9 * dist.mass.max()))


def smooth_draws(s, cfg: SmoothingConfig, rng: np.random.Generator, draws: Optional[int] = None):
    """``draws`` (default ``cfg.eval_draws``) Laplace perturbations of ``s``."""
    s = np.asarray(s, dtype=float)
    n = cfg.eval_draws if draws is None else draws
    return s + rng.laplace(0.0, cfg.epsilon, size=(n, len(s)))
