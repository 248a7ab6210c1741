"""Command-line interface: ``dpot <subcommand> ...``.

Exit status is 0 on success, 1 for usage errors, 2 for data errors and 3 for
solver or geometry failures. Errors print one line ``error[<code>]: message``
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import io
from .core import ScoredDataset, project_to_simplex
from .errors import DpotError, LabelsRequiredError, UsageError
from .metrics import balanced_error, dp_gap_from_pmfs, max_fair_accuracy, outcomes_from_predictions
from .oracle import default_spec, generalization_run, generate, write_report_csv
from .pipeline import MODES, apply, fit, load_model, save_model
from .plot import render_partition_svg
from .transport import NnTransport, SmoothingConfig


@dataclass(frozen=True)
class RunConfig:
    """Fit/apply settings gathered from the command line."""

    mode: str = "auto"
    weights: Union[str, tuple] = "balanced"
    epsilon: Optional[float] = None
    fit_draws: Optional[int] = None
    eval_draws: Optional[int] = None
    seed: int = 0
    round_digits: Optional[int] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"--mode must be one of {', '.join(MODES)}")
        smooth_flags = (self.epsilon, self.fit_draws, self.eval_draws)
        if self.mode != "smooth" and any(v is not None for v in smooth_flags):
            raise UsageError("--epsilon, --fit-draws and --eval-draws need --mode smooth")
        if self.mode == "smooth" and self.round_digits is not None:
            raise UsageError("--round-digits does not apply to --mode smooth")

    def smoothing(self, k: int) -> Optional[SmoothingConfig]:
        if self.mode != "smooth":
            return None
        base = SmoothingConfig.default(k)
        return SmoothingConfig(
            base.epsilon if self.epsilon is None else self.epsilon,
            base.fit_draws if self.fit_draws is None else self.fit_draws,
            base.eval_draws if self.eval_draws is None else self.eval_draws)


def parse_weights(text: str):
    if text in ("balanced", "counts"):
        return text
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--weights must be balanced, counts or a comma list, got {text!r}") from None


def _int_list(text: str):
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config(args) -> RunConfig:
    return RunConfig(args.mode, parse_weights(args.weights), args.epsilon, args.fit_draws,
                     args.eval_draws, args.seed, args.round_digits)


def cmd_fit(args, out) -> None:
    cfg = _config(args)
    data = io.parse_scores_csv(args.data)
    model = fit(data, mode=cfg.mode, weights=cfg.weights, smoothing=cfg.smoothing(data.k),
                seed=cfg.seed, round_digits=cfg.round_digits)
    save_model(model, args.model)
    d = model.diagnostics
    print(f"mode\t{model.mode}", file=out)
    print(f"objective\t{d['objective']:.10g}", file=out)
    print("q\t" + ",".join(f"{x:.10g}" for x in model.q), file=out)
    if "margins" in d:
        print("margins\t" + ",".join(f"{x:.6g}" for x in d["margins"]), file=out)
        print("disagreements\t" + ",".join(str(x) for x in d["disagreements"]), file=out)


def cmd_apply(args, out) -> None:
    model = load_model(args.model)
    data = io.parse_scores_csv(args.data)
    pred = apply(model, data, seed=args.seed)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("group,class," + ",".join(f"p{i}" for i in range(model.k)) + "\n")
        for g, c, p in zip(data.groups, pred.classes, pred.pmfs):
            fh.write(f"{data.group_names[g]},{c}," + ",".join(format(x, ".17g") for x in p) + "\n")
    print(f"wrote {data.n} predictions to {args.out}", file=out)


def evaluate_report(model, data: ScoredDataset, seed: int = 0) -> dict:
    """Balanced accuracy and DP gap of the raw argmax classifier and the post-processed one."""
    if not data.has_labels:
        raise LabelsRequiredError("evaluate needs a label on every row")
    k, m = data.k, data.m
    pre = np.argmax(project_to_simplex(data.scores), axis=1)
    post = apply(model, data, seed=seed).classes
    rows = {}
    for name, pred in (("pre", pre), ("post", post)):
        oc = outcomes_from_predictions(data.groups, pred, data.labels, m=m, k=k)
        rows[name] = (balanced_error(oc).mean_accuracy, dp_gap_from_pmfs(oc.pred_pmf))
    return rows


def cmd_evaluate(args, out) -> None:
    model = load_model(args.model)
    data = io.parse_scores_csv(args.data)
    rep = evaluate_report(model, data, args.seed)
    (acc0, gap0), (acc1, gap1) = rep["pre"], rep["post"]
    print(f"{'metric':<14}{'pre':>10}{'post':>10}{'delta':>10}", file=out)
    print(f"{'balanced_acc':<14}{acc0:>10.2f}{acc1:>10.2f}{acc1 - acc0:>10.2f}", file=out)
    print(f"{'dp_gap':<14}{gap0:>10.4f}{gap1:>10.4f}{gap1 - gap0:>10.4f}", file=out)


def dataset_stats(path) -> dict:
    """Per-group label pmfs, their DP gap and the DP-fair accuracy ceiling.

    ``path`` is either a pmf table (``group,count,...`` header) or a labeled
    score CSV.
    """
    header = [h.strip() for h in io.read_header(path)]
    if header[:2] == ["group", "count"]:
        table = io.parse_pmf_table(path)
        names, classes, pmfs = table.group_names, table.class_names, table.pmfs
    else:
        data = io.parse_scores_csv(path)
        names, classes, pmfs = data.group_names, tuple(f"c{i}" for i in range(data.k)), data.label_pmfs()
    return {"group_names": names, "class_names": classes, "pmfs": pmfs,
            "dp_gap": dp_gap_from_pmfs(pmfs), "max_fair_accuracy": max_fair_accuracy(pmfs)}


def cmd_stats(args, out) -> None:
    if (args.data is None) == (args.fixture is None):
        raise UsageError("give exactly one of a data path or --fixture")
    path = io.fixture_path(args.fixture) if args.fixture else args.data
    st = dataset_stats(path)
    print("group\t" + "\t".join(st["class_names"]), file=out)
    for name, p in zip(st["group_names"], st["pmfs"]):
        print(name + "\t" + "\t".join(f"{x:.4f}" for x in p), file=out)
    print(f"dp_gap\t{st['dp_gap']:.4f}", file=out)
    print(f"max_fair_accuracy\t{st['max_fair_accuracy']:.2f}", file=out)


def cmd_synth(args, out) -> None:
    spec = default_spec(k=args.k, m=args.m, n=args.n, seed=args.seed)
    data = generate(spec)
    io.write_scores_csv(data, args.out)
    print(f"wrote {data.n} rows to {args.out}", file=out)


def cmd_bench(args, out) -> None:
    n_list = _int_list(args.n)
    spec = default_spec(k=args.k, m=args.m, n=max(n_list), seed=args.seed)
    report = generalization_run(spec, n_list, args.holdout, list(range(args.seeds)), mode=args.mode,
                                reference_n=args.reference_n, workers=args.workers)
    if args.out:
        write_report_csv(report, args.out)
    print(f"{'n':>8}{'dp_gap':>12}{'excess_error':>14}", file=out)
    for row in report.summary:
        print(f"{row['n']:>8}{row['dp_gap']:>12.5f}{row['excess_error']:>14.5f}", file=out)
    print(f"slope\t{report.slope:.4f}", file=out)


def cmd_plot(args, out) -> None:
    if (args.model is None) == (args.psi is None):
        raise UsageError("give exactly one of --model or --psi")
    if args.psi is not None:
        try:
            tmap = NnTransport(np.array([float(x) for x in args.psi.split(",")]))
        except ValueError:
            raise UsageError(f"--psi must be a comma list of numbers, got {args.psi!r}") from None
        title = "psi " + args.psi
    else:
        model = load_model(args.model)
        if model.mode == "lookup":
            raise UsageError("lookup models have no partition to plot")
        name = args.group if args.group is not None else model.group_names[0]
        if name not in model.group_names:
            raise UsageError(f"group {name!r} is not in the model")
        tmap = model.transports[model.group_names.index(name)]
        title = f"group {name}"
    render_partition_svg(tmap, args.out, title)
    print(f"wrote {args.out}", file=out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpot", description="Demographic-parity post-processing of multiclass scores.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fit_flags(sp):
        sp.add_argument("--mode", default="auto", choices=MODES)
        sp.add_argument("--weights", default="balanced", help="balanced, counts or w1,w2,...")
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--fit-draws", type=int)
        sp.add_argument("--eval-draws", type=int)
        sp.add_argument("--round-digits", type=int)

    sp = sub.add_parser("fit", help="fit a post-processor and save the model")
    sp.add_argument("data")
    sp.add_argument("--model", required=True, help="output model path")
    sp.add_argument("--seed", type=int, default=0)
    fit_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("apply", help="post-process scores with a saved model")
    sp.add_argument("data")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_apply)

    sp = sub.add_parser("evaluate", help="balanced accuracy and DP gap before and after")
    sp.add_argument("data")
    sp.add_argument("--model", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("stats", help="label pmfs, DP gap and fair-accuracy ceiling")
    sp.add_argument("data", nargs="?")
    sp.add_argument("--fixture", choices=io.FIXTURES)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("synth", help="write a synthetic calibrated score dataset")
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--n", type=int, default=1000, help="rows per group")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", help="holdout DP gap and excess error against sample size")
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--n", default="250,1000,4000,16000", help="comma list of rows per group")
    sp.add_argument("--holdout", type=int, default=100_000)
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", default="nn", choices=("nn", "lookup", "smooth", "auto"))
    sp.add_argument("--reference-n", type=int, default=4000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("plot", help="SVG of a k=3 nearest-vertex partition")
    sp.add_argument("--model")
    sp.add_argument("--group")
    sp.add_argument("--psi", help="comma list of k=3 offsets instead of a model")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        args.func(args, out)
    except DpotError as exc:
        msg = " ".join(str(exc).split())
        print(f"error[{exc.code}]: {msg}", file=sys.stderr)
        return exc.exit_status
    except OSError as exc:
        print(f"error[io]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
