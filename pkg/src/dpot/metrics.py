"""Group-balanced error, DP gap and fair-accuracy ceilings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .barycenter import check_weights, tv_barycenter
from .errors import EmptyGroupError, InvalidInputError, LabelsRequiredError


@dataclass(frozen=True)
class GroupOutcome:
    """Per-group prediction summary.

    ``confusion[a, y_hat, y]`` holds (expected) counts of predicted class
    ``y_hat`` against true class ``y``; it is ``None`` when labels are
    unavailable. ``pred_pmf[a]`` is the group's predicted-class distribution.
    """

    pred_pmf: np.ndarray
    sizes: np.ndarray
    confusion: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return len(self.sizes)


class BalancedError(NamedTuple):
    per_group: np.ndarray
    aggregate: float
    mean_accuracy: float


def _as_pmfs(pred, k: int) -> np.ndarray:
    pred = np.asarray(pred)
    if pred.ndim == 1:
        out = np.zeros((len(pred), k))
        out[np.arange(len(pred)), pred.astype(np.int64)] = 1.0
        return out
    return pred.astype(float)


def outcomes_from_predictions(groups, pred, labels=None, m: Optional[int] = None,
                              k: Optional[int] = None) -> GroupOutcome:
    """Summarize predictions per group.

    ``pred`` is either class indices (n,) or per-row output pmfs (n, k); with
    pmfs the confusion counts are expectations over the classifier's
    randomness. Missing labels (any entry < 0) leave ``confusion`` unset.
    """
    groups = np.asarray(groups, dtype=np.int64)
    pred = np.asarray(pred)
    if k is None:
        k = pred.shape[1] if pred.ndim == 2 else int(pred.max()) + 1
    m = int(groups.max()) + 1 if m is None else m
    P = _as_pmfs(pred, k)
    sizes = np.bincount(groups, minlength=m).astype(float)
    if np.any(sizes == 0):
        raise EmptyGroupError("every group needs at least one prediction")
    pred_pmf = np.zeros((m, k))
    np.add.at(pred_pmf, groups, P)
    pred_pmf /= sizes[:, None]
    confusion = None
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if np.all(labels >= 0):
            confusion = np.zeros((m, k, k))
            for a in range(m):
                sel = groups == a
                onehot = np.zeros((int(sel.sum()), k))
                onehot[np.arange(len(onehot)), labels[sel]] = 1.0
                confusion[a] = P[sel].T @ onehot
    return GroupOutcome(pred_pmf, sizes, confusion)


def balanced_error(outcomes: GroupOutcome, weights=None) -> BalancedError:
    """Per-group error rates, their weighted sum, and the mean accuracy in percent.

    ``weights`` defaults to 1 per group, so ``aggregate`` is the plain sum of
    group error rates. ``mean_accuracy`` always averages groups equally.
    """
    if outcomes.confusion is None:
        raise LabelsRequiredError("error rates need labels for every row")
    C = outcomes.confusion
    correct = np.trace(C, axis1=1, axis2=2)
    per_group = 1.0 - correct / outcomes.sizes
    w = np.ones(outcomes.m) if weights is None else check_weights(weights, outcomes.m)
    aggregate = float(w @ per_group)
    return BalancedError(per_group, aggregate, 100.0 * (1.0 - float(per_group.mean())))


def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def dp_gap_from_pmfs(pmfs) -> float:
    P = np.atleast_2d(np.asarray(pmfs, dtype=float))
    if len(P) < 2:
        return 0.0
    return 0.5 * float(np.abs(P[:, None, :] - P[None, :, :]).sum(axis=2).max())


def dp_gap(outcomes) -> float:
    """Largest total-variation distance between two groups' predicted-class pmfs."""
    pmfs = outcomes.pred_pmf if isinstance(outcomes, GroupOutcome) else outcomes
    return dp_gap_from_pmfs(pmfs)


def max_fair_accuracy(pmfs, weights=None) -> float:
    """Best accuracy (percent) a DP-fair classifier can reach on labels with these class pmfs.

    Computed from the TV barycenter of the per-group label distributions; the
    weights are normalized to sum to 1 (equal by default).
    """
    P = np.atleast_2d(np.asarray(pmfs, dtype=float))
    m = len(P)
    w = np.full(m, 1.0 / m) if weights is None else check_weights(weights, m)
    w = w / w.sum()
    _, cost = tv_barycenter(P, w)
    return 100.0 * (1.0 - cost)


def expected_error_rates(groups, pred_pmfs, true_scores, m: Optional[int] = None) -> np.ndarray:
    """Per-group error rates when labels follow ``Categorical(true_scores)``.

    Exact expectation over both the label draw and the classifier's output
    pmf: a row contributes ``1 - pred_pmf . true_score``.
    """
    groups = np.asarray(groups, dtype=np.int64)
    P = np.asarray(pred_pmfs, dtype=float)
    S = np.asarray(true_scores, dtype=float)
    if P.shape != S.shape:
        raise InvalidInputError("prediction pmfs and true scores must have the same shape")
    m = int(groups.max()) + 1 if m is None else m
    err = 1.0 - np.einsum("ij,ij->i", P, S)
    sizes = np.bincount(groups, minlength=m)
    return np.bincount(groups, weights=err, minlength=m) / sizes
