"""Fit and apply a demographic-parity post-processor on predictor scores.

Fitting solves the barycenter program on the per-group empirical score
distributions and turns each group's coupling into a transport map. The fair
classifier is the composition of the predictor with the map of the row's
group.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .barycenter import group_weights, solve_barycenter
from .core import ScoredDataset, empirical_from_points, project_to_simplex
from .errors import (EmptyGroupError, GeometryInfeasibleError, InvalidInputError, MalformedDocumentError,
                     UnknownGroupError, VersionMismatchError)
from .transport import (LookupTransport, NnTransport, SmoothingConfig, count_disagreements,
                        evaluate_nn, lookup_from_plan, nn_from_plan)

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"
MODES = ("auto", "lookup", "nn", "smooth")

# stream tags mixed into rng seeds so fit and apply draws never collide
_FIT_STREAM = 0
_LOOKUP_STREAM = 1
_SMOOTH_STREAM = 2


def row_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream, int(index)])


@dataclass(eq=False)
class PostProcessorModel:
    k: int
    group_names: tuple
    q: np.ndarray
    weights: np.ndarray
    mode: str
    transports: tuple
    smoothing: Optional[SmoothingConfig] = None
    round_digits: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)
    version: str = FORMAT_VERSION

    def __post_init__(self):
        if len(self.transports) != len(self.group_names):
            raise InvalidInputError("need exactly one transport per group")
        if len(self.q) != self.k or any(t.k != self.k for t in self.transports):
            raise InvalidInputError("barycenter and transports disagree on k")
        if self.mode not in MODES[1:]:
            raise InvalidInputError(f"unknown mode {self.mode!r}")

    @property
    def m(self) -> int:
        return len(self.group_names)

    def __eq__(self, other):
        if not isinstance(other, PostProcessorModel):
            return NotImplemented
        if (self.k, self.group_names, self.mode, self.smoothing, self.round_digits, self.version) != \
                (other.k, other.group_names, other.mode, other.smoothing, other.round_digits, other.version):
            return False
        if not (np.array_equal(self.q, other.q) and np.array_equal(self.weights, other.weights)):
            return False
        for a, b in zip(self.transports, other.transports):
            if type(a) is not type(b):
                return False
            if isinstance(a, NnTransport) and not np.array_equal(a.psi, b.psi):
                return False
            if isinstance(a, LookupTransport) and not (
                    np.array_equal(a.support, b.support) and np.array_equal(a.kernel, b.kernel)):
                return False
        return _diag_equal(self.diagnostics, other.diagnostics)


def _diag_equal(a, b) -> bool:
    if a.keys() != b.keys():
        return False
    return all(np.array_equal(np.asarray(a[key]), np.asarray(b[key])) for key in a)


class Predictions(NamedTuple):
    classes: np.ndarray
    pmfs: np.ndarray


def _choose_mode(dists, sizes, threshold: int) -> str:
    small = all(len(d) <= threshold for d in dists)
    distinct = sum(len(d) for d in dists) / float(sum(sizes))
    return "lookup" if small and distinct < 0.5 else "nn"


def fit(data: ScoredDataset, mode: str = "auto", weights: Union[str, Sequence[float]] = "balanced",
        smoothing: Optional[SmoothingConfig] = None, seed: int = 0,
        round_digits: Optional[int] = None, auto_threshold: int = 64) -> PostProcessorModel:
    """Fit the post-processor to a scored (possibly unlabeled) dataset.

    Parameters
    ----------
    data : ScoredDataset
        Predictor scores with their groups; labels are not used.
    mode : {"auto", "lookup", "nn", "smooth"}
        ``lookup`` keeps the coupling's rows as a table (finite score sets),
        ``nn`` extracts an offset nearest-vertex map (continuous scores),
        ``smooth`` fits the nn map on Laplace-perturbed scores. ``auto``
        picks lookup when every group has at most ``auto_threshold`` distinct
        scores and fewer than half of all rows are distinct, else nn.
    weights : "balanced", "counts" or a sequence
        Group weights of the barycenter objective.
    smoothing : SmoothingConfig, optional
        Smooth-mode settings; defaults to ``SmoothingConfig.default(k)``.
    seed : int
        Seed of the smooth-mode perturbations.
    round_digits : int, optional
        Round projected scores to this many decimals before merging atoms.
    """
    if mode not in MODES:
        raise InvalidInputError(f"unknown mode {mode!r}; expected one of {MODES}")
    k, m = data.k, data.m
    sizes = data.group_sizes()
    w = group_weights(weights, sizes)
    projected = project_to_simplex(data.scores) if data.n else data.scores

    if mode == "smooth":
        smoothing = smoothing or SmoothingConfig.default(k)
    elif smoothing is not None:
        raise InvalidInputError("smoothing settings only apply to mode='smooth'")

    dists = []
    for a in range(m):
        rows = projected[data.group_mask(a)]
        if len(rows) == 0:
            raise EmptyGroupError(f"group {data.group_names[a]!r} has no rows")
        if mode == "smooth":
            rng = row_rng(seed, _FIT_STREAM, a)
            rows = np.repeat(rows, smoothing.fit_draws, axis=0)
            rows = rows + rng.laplace(0.0, smoothing.epsilon, size=rows.shape)
            dists.append(empirical_from_points(rows))
        else:
            dists.append(empirical_from_points(rows, round_digits))
    if mode == "auto":
        mode = _choose_mode(dists, sizes, auto_threshold)
        log.info("auto mode selected %s", mode)

    result = solve_barycenter(dists, w)
    transports, margins, disagreements = [], [], []
    for a, (plan, dist) in enumerate(zip(result.plans, dists)):
        if mode == "lookup":
            transports.append(lookup_from_plan(plan, dist, round_digits))
            continue
        try:
            tmap, center = nn_from_plan(plan, dist)
        except GeometryInfeasibleError as exc:
            raise GeometryInfeasibleError(f"group {data.group_names[a]!r}: {exc}",
                                          group=data.group_names[a], margin=exc.margin) from exc
        transports.append(tmap)
        margins.append(center.margin)
        disagreements.append(count_disagreements(tmap, plan, dist))

    diagnostics = {
        "objective": result.objective,
        "support_sizes": [len(d) for d in dists],
        "calibration_assumed": True,
    }
    if mode != "lookup":
        diagnostics["margins"] = margins
        diagnostics["disagreements"] = disagreements
    return PostProcessorModel(
        k=k, group_names=data.group_names, q=result.q, weights=w, mode=mode,
        transports=tuple(transports), smoothing=smoothing if mode == "smooth" else None,
        round_digits=round_digits if mode != "smooth" else None, diagnostics=diagnostics)


def _model_group_index(model: PostProcessorModel, data: ScoredDataset) -> np.ndarray:
    index = {name: i for i, name in enumerate(model.group_names)}
    missing = [g for g in data.group_names if g not in index]
    if missing:
        raise UnknownGroupError(f"groups not seen at fit time: {', '.join(map(repr, missing))}")
    lut = np.array([index[g] for g in data.group_names], dtype=np.int64)
    return lut[data.groups] if data.n else data.groups


def apply(model: PostProcessorModel, data: ScoredDataset, seed: int = 0) -> Predictions:
    """Post-process every row of ``data``.

    Each row gets a class and the output pmf it was drawn from. Randomness
    uses a stream derived from ``(seed, row index)`` so results do not depend
    on evaluation order.
    """
    if data.k != model.k:
        raise InvalidInputError(f"data has k={data.k}, model expects k={model.k}")
    groups = _model_group_index(model, data)
    n, k = data.n, model.k
    S = project_to_simplex(data.scores) if n else data.scores
    classes = np.zeros(n, dtype=np.int64)
    pmfs = np.zeros((n, k))
    for a, tmap in enumerate(model.transports):
        idx = np.flatnonzero(groups == a)
        if len(idx) == 0:
            continue
        if model.mode == "nn":
            c = evaluate_nn(tmap, S[idx])
            classes[idx] = c
            pmfs[idx, c] = 1.0
        elif model.mode == "lookup":
            rows = tmap.rows(S[idx])
            pmfs[idx] = rows
            cdf = np.cumsum(rows, axis=1)
            for r, cdf_r in zip(idx, cdf):
                u = row_rng(seed, _LOOKUP_STREAM, r).random() * cdf_r[-1]
                classes[r] = min(int(np.searchsorted(cdf_r, u, side="right")), k - 1)
        else:
            cfg = model.smoothing
            for r in idx:
                rng = row_rng(seed, _SMOOTH_STREAM, r)
                draws = S[r] + rng.laplace(0.0, cfg.epsilon, size=(cfg.eval_draws, k))
                pmf = np.bincount(evaluate_nn(tmap, draws), minlength=k) / cfg.eval_draws
                pmfs[r] = pmf
                u = rng.random()
                classes[r] = min(int(np.searchsorted(np.cumsum(pmf), u, side="right")), k - 1)
    return Predictions(classes, pmfs)


# -- persistence -----------------------------------------------------------

def _num(x) -> str:
    return format(float(x), ".17g")


def _nums(xs):
    return [_num(x) for x in np.asarray(xs, dtype=float).ravel()]


def _matrix(xs):
    return [_nums(row) for row in np.asarray(xs, dtype=float)]


def model_to_document(model: PostProcessorModel) -> dict:
    groups = []
    for name, tmap in zip(model.group_names, model.transports):
        entry = {"name": name, "mode": model.mode}
        if isinstance(tmap, LookupTransport):
            entry["kernel"] = {"support": _matrix(tmap.support), "rows": _matrix(tmap.kernel)}
        else:
            entry["psi"] = _nums(tmap.psi)
            if model.smoothing is not None:
                entry["smoothing"] = {"epsilon": _num(model.smoothing.epsilon),
                                      "fit_draws": model.smoothing.fit_draws,
                                      "eval_draws": model.smoothing.eval_draws}
        groups.append(entry)
    diag = {key: _diag_value(val) for key, val in model.diagnostics.items()}
    return {
        "format": "dpot-model",
        "version": model.version,
        "k": model.k,
        "m": model.m,
        "mode": model.mode,
        "group_names": list(model.group_names),
        "weights": _nums(model.weights),
        "q": _nums(model.q),
        "round_digits": model.round_digits,
        "groups": groups,
        "diagnostics": diag,
    }


def _diag_value(val):
    # ints and flags stay JSON-native, floats become 17-digit strings
    if isinstance(val, (list, tuple, np.ndarray)):
        return [_diag_value(v) for v in val]
    if isinstance(val, bool) or val is None:
        return val
    if isinstance(val, (int, np.integer)):
        return int(val)
    return _num(val)


def _parse_nums(xs, length=None, what="vector"):
    try:
        out = np.array([float(x) for x in xs], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedDocumentError(f"bad number in {what}: {exc}") from exc
    if length is not None and len(out) != length:
        raise MalformedDocumentError(f"{what} has length {len(out)}, expected {length}")
    return out


def model_from_document(doc: dict) -> PostProcessorModel:
    if not isinstance(doc, dict):
        raise MalformedDocumentError("model document must be an object")
    version = str(doc.get("version"))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version!r} is not supported (this library reads version {FORMAT_VERSION!r})")
    try:
        k = int(doc["k"])
        m = int(doc["m"])
        mode = doc["mode"]
        names = tuple(doc["group_names"])
        entries = doc["groups"]
        round_digits = doc.get("round_digits")
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocumentError(f"missing or invalid field: {exc}") from exc
    if len(names) != m or len(entries) != m:
        raise MalformedDocumentError(f"expected {m} groups")
    q = _parse_nums(doc.get("q", []), k, "q")
    weights = _parse_nums(doc.get("weights", []), m, "weights")
    transports = []
    smoothing = None
    for entry in entries:
        if entry.get("mode") != mode:
            raise MalformedDocumentError("group mode differs from model mode")
        if mode == "lookup":
            kern = entry.get("kernel") or {}
            support = np.array([_parse_nums(r, k, "kernel support row") for r in kern.get("support", [])])
            rows = np.array([_parse_nums(r, k, "kernel row") for r in kern.get("rows", [])])
            if len(support) == 0 or len(support) != len(rows):
                raise MalformedDocumentError("kernel support and rows must be non-empty and aligned")
            try:
                transports.append(LookupTransport(support, rows, round_digits))
            except InvalidInputError as exc:
                raise MalformedDocumentError(str(exc)) from exc
        else:
            psi = _parse_nums(entry.get("psi", []), k, "psi")
            transports.append(NnTransport(psi))
            if mode == "smooth":
                sm = entry.get("smoothing") or {}
                try:
                    cfg = SmoothingConfig(float(sm["epsilon"]), int(sm["fit_draws"]), int(sm["eval_draws"]))
                except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
                    raise MalformedDocumentError(f"bad smoothing settings: {exc}") from exc
                if smoothing is not None and cfg != smoothing:
                    raise MalformedDocumentError("groups disagree on smoothing settings")
                smoothing = cfg
    diagnostics = {}
    for key, val in (doc.get("diagnostics") or {}).items():
        if isinstance(val, list):
            diagnostics[key] = [v if isinstance(v, int) else float(v) for v in val]
        elif isinstance(val, str):
            diagnostics[key] = float(val)
        else:
            diagnostics[key] = val
    try:
        return PostProcessorModel(k=k, group_names=names, q=q, weights=weights, mode=mode,
                                  transports=tuple(transports), smoothing=smoothing,
                                  round_digits=round_digits, diagnostics=diagnostics, version=version)
    except InvalidInputError as exc:
        raise MalformedDocumentError(str(exc)) from exc


def save_model(model: PostProcessorModel, destination) -> None:
    Path(destination).write_text(json.dumps(model_to_document(model), indent=1) + "\n", encoding="utf-8")


def load_model(source) -> PostProcessorModel:
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"not a JSON document: {exc}") from exc
    return model_from_document(doc)
