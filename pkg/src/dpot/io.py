"""CSV formats: score datasets and per-group class-pmf tables."""

from __future__ import annotations

import csv
import math
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import ScoredDataset
from .errors import InvalidInputError

FIXTURES = ("adult_gender", "adult_race", "adult_gender_race", "biosbias_gender", "communities_race")


class PmfTable(NamedTuple):
    group_names: tuple
    counts: np.ndarray
    class_names: tuple
    pmfs: np.ndarray


def _open_rows(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    with fh:
        return list(csv.reader(fh))


def _float(text: str, line: int, what: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise InvalidInputError(f"line {line}: {what} {text!r} is not a number") from None
    if not math.isfinite(val):
        raise InvalidInputError(f"line {line}: {what} {text!r} is not finite")
    return val


def read_header(path) -> list:
    rows = _open_rows(path)
    return rows[0] if rows else []


def parse_scores_csv(path) -> ScoredDataset:
    """Read ``group,label,s0,...,s{k-1}`` rows; an empty label means unlabeled."""
    rows = _open_rows(path)
    if not rows:
        raise InvalidInputError(f"{path}: missing header")
    header = [h.strip() for h in rows[0]]
    k = len(header) - 2
    expected = ["group", "label"] + [f"s{i}" for i in range(k)]
    if k < 2 or header != expected:
        raise InvalidInputError(f"line 1: header must be group,label,s0,...,s{{k-1}} with k >= 2, got {','.join(header)}")
    tokens, labels, scores = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise InvalidInputError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        tokens.append(row[0].strip())
        lab = row[1].strip()
        if lab == "":
            labels.append(-1)
        else:
            try:
                val = int(lab)
            except ValueError:
                raise InvalidInputError(f"line {line}: label {lab!r} is not an integer") from None
            if not 0 <= val < k:
                raise InvalidInputError(f"line {line}: label {val} outside [0, {k})")
            labels.append(val)
        scores.append([_float(x, line, f"score s{i}") for i, x in enumerate(row[2:])])
    return ScoredDataset.from_rows(tokens, np.array(scores, dtype=float).reshape(-1, k), labels)


def write_scores_csv(data: ScoredDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "label"] + [f"s{i}" for i in range(data.k)])
        for g, lab, s in zip(data.groups, data.labels, data.scores):
            writer.writerow([data.group_names[g], "" if lab < 0 else int(lab)]
                            + [format(float(x), ".17g") for x in s])


def parse_pmf_table(path) -> PmfTable:
    """Read ``group,count,<class>...`` rows of class percentages (or probabilities).

    Each row is normalized to sum to 1, absorbing rounding in the source table.
    """
    rows = _open_rows(path)
    if not rows or [h.strip() for h in rows[0][:2]] != ["group", "count"] or len(rows[0]) < 4:
        raise InvalidInputError(f"line 1: header must be group,count,<class>,<class>,...")
    header = rows[0]
    names, counts, pmfs = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InvalidInputError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        names.append(row[0].strip())
        counts.append(_float(row[1], line, "count"))
        p = np.array([_float(x, line, "class share") for x in row[2:]])
        if np.any(p < 0) or p.sum() <= 0:
            raise InvalidInputError(f"line {line}: class shares must be nonnegative with a positive total")
        pmfs.append(p / p.sum())
    if not names:
        raise InvalidInputError(f"{path}: no groups")
    return PmfTable(tuple(names), np.array(counts), tuple(h.strip() for h in header[2:]), np.array(pmfs))


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise InvalidInputError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return Path(str(resources.files("dpot") / "fixtures" / f"{name}.csv"))
