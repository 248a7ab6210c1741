"""Simplex geometry, score datasets and empirical score distributions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyGroupError, InvalidInputError, LabelsRequiredError

# Simplex-membership tolerance for score vectors.
SIMPLEX_TOL = 1e-9


def is_on_simplex(v, tol: float = SIMPLEX_TOL) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-then-threshold algorithm (Blondel et al., 2014). Works on a single
    vector or row-wise on a 2-d array. Rows already on the simplex (within
    ``SIMPLEX_TOL``) are returned unchanged, which makes the map exactly
    idempotent.

    Raises
    ------
    InvalidInputError
        If any entry is non-finite or fewer than two coordinates are given.
    """
    arr = np.array(v, dtype=float)
    single = arr.ndim == 1
    V = np.atleast_2d(arr)
    if V.ndim != 2 or V.shape[1] < 2:
        raise InvalidInputError(f"need at least 2 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("score vector contains non-finite entries")

    keep = np.all(V >= -SIMPLEX_TOL, axis=1) & (np.abs(V.sum(axis=1) - 1.0) <= SIMPLEX_TOL)
    out = V.copy()
    todo = ~keep
    if np.any(todo):
        W = V[todo]
        U = np.sort(W, axis=1)[:, ::-1]
        cssv = np.cumsum(U, axis=1) - 1.0
        ind = np.arange(1, W.shape[1] + 1)
        rho = np.count_nonzero(U - cssv / ind > 0, axis=1)
        theta = cssv[np.arange(len(W)), rho - 1] / rho
        out[todo] = np.maximum(W - theta[:, None], 0.0)
    return out[0] if single else out


def l1_vertex_cost(s, i: int) -> float:
    """ℓ1 distance from a simplex point to the vertex ``e_i``, i.e. ``2 (1 - s_i)``."""
    return 2.0 * (1.0 - float(np.asarray(s, dtype=float)[i]))


def vertex_costs(points) -> np.ndarray:
    """Cost matrix ``2 (1 - s_i)`` for every row of ``points`` and every vertex."""
    return 2.0 * (1.0 - np.asarray(points, dtype=float))


@dataclass(frozen=True)
class ScoredDataset:
    """Rows of (group index, score vector, optional label).

    ``labels`` uses -1 for a missing label. Scores are stored as given; they
    are projected onto the simplex when distributions are built.
    """

    groups: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    group_names: tuple

    def __post_init__(self):
        groups = np.asarray(self.groups, dtype=np.int64).reshape(-1)
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 2:
            raise InvalidInputError("scores must be a 2-d array")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        names = tuple(str(g) for g in self.group_names)
        n, k = scores.shape
        if len(groups) != n or len(labels) != n:
            raise InvalidInputError("groups, scores and labels must have equal length")
        if k < 2:
            raise InvalidInputError("need at least 2 classes")
        if len(set(names)) != len(names):
            raise InvalidInputError("duplicate group names")
        if n and (groups.min() < 0 or groups.max() >= len(names)):
            raise InvalidInputError("group index out of range")
        if n and (labels.min() < -1 or labels.max() >= k):
            raise InvalidInputError("label out of range")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "group_names", names)

    @classmethod
    def from_rows(cls, tokens: Iterable, scores, labels: Optional[Sequence] = None,
                  group_names: Optional[Sequence[str]] = None) -> "ScoredDataset":
        """Build a dataset from group tokens, indexing groups by first appearance.

        ``group_names`` fixes the index order up front; tokens outside it are
        rejected.
        """
        tokens = [str(t) for t in tokens]
        names = list(group_names) if group_names is not None else []
        index = {name: i for i, name in enumerate(names)}
        groups = []
        for t in tokens:
            if t not in index:
                if group_names is not None:
                    raise InvalidInputError(f"unknown group {t!r}")
                index[t] = len(names)
                names.append(t)
            groups.append(index[t])
        scores = np.asarray(scores, dtype=float).reshape(len(tokens), -1)
        if labels is None:
            labels = -np.ones(len(tokens), dtype=np.int64)
        return cls(np.array(groups, dtype=np.int64), scores,
                   np.array([-1 if l is None else l for l in labels], dtype=np.int64),
                   tuple(names))

    @property
    def n(self) -> int:
        return len(self.groups)

    @property
    def k(self) -> int:
        return self.scores.shape[1]

    @property
    def m(self) -> int:
        return len(self.group_names)

    @property
    def has_labels(self) -> bool:
        return self.n > 0 and bool(np.all(self.labels >= 0))

    def group_mask(self, a: int) -> np.ndarray:
        return self.groups == a

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.m)

    def label_pmfs(self) -> np.ndarray:
        """Per-group empirical class distribution of the labels, shape (m, k)."""
        if not self.has_labels:
            raise LabelsRequiredError("dataset has rows without labels")
        counts = np.zeros((self.m, self.k))
        np.add.at(counts, (self.groups, self.labels), 1.0)
        sizes = counts.sum(axis=1, keepdims=True)
        if np.any(sizes == 0):
            raise EmptyGroupError("a declared group has no rows")
        return counts / sizes


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Finite distribution on score space: distinct atoms with positive masses."""

    support: np.ndarray
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if support.ndim != 2 or len(support) != len(mass) or len(mass) == 0:
            raise InvalidInputError("support and mass must be non-empty and aligned")
        if np.any(mass <= 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise InvalidInputError("masses must be positive and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @property
    def k(self) -> int:
        return self.support.shape[1]

    def __len__(self) -> int:
        return len(self.mass)


def dedup_points(points, weights=None):
    """Merge identical rows, keeping first-appearance order.

    Returns ``(atoms, mass, inverse)`` where ``inverse[r]`` is the atom of row r
    and ``mass`` sums the row weights (uniform if not given).
    """
    P = np.ascontiguousarray(np.asarray(points, dtype=float))
    n = len(P)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    # +0.0 folds -0.0 into 0.0 so byte-level comparison matches numeric equality
    P = P + 0.0
    keys = P.view(np.dtype((np.void, P.dtype.itemsize * P.shape[1]))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    inverse = rank[inverse.ravel()]
    mass = np.bincount(inverse, weights=w, minlength=len(order))
    return P[first[order]], mass, inverse


def empirical_from_points(points, round_digits: Optional[int] = None) -> EmpiricalDistribution:
    """Uniform empirical distribution of ``points`` with duplicates merged.

    Points are used as given (no projection); see ``empirical_from_scores``.
    """
    P = np.asarray(points, dtype=float)
    if len(P) == 0:
        raise EmptyGroupError("no points")
    if round_digits is not None:
        P = np.round(P, round_digits)
    atoms, mass, _ = dedup_points(P)
    # renormalize away bincount rounding so the total is 1 to machine precision
    return EmpiricalDistribution(atoms, mass / mass.sum())


def empirical_from_scores(data: ScoredDataset, group: int,
                          round_digits: Optional[int] = None) -> EmpiricalDistribution:
    """Empirical distribution of a group's projected (and optionally rounded) scores."""
    rows = data.scores[data.group_mask(group)]
    if len(rows) == 0:
        name = data.group_names[group] if 0 <= group < data.m else group
        raise EmptyGroupError(f"group {name!r} has no rows")
    return empirical_from_points(project_to_simplex(rows), round_digits)
