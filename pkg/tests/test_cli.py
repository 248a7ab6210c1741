import io as _io
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dpot import io
from dpot.cli import RunConfig, dataset_stats, main
from dpot.core import ScoredDataset
from dpot.errors import InvalidInputError, LabelsRequiredError, UsageError
from dpot.oracle import default_spec, generate


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_minimal(tmp_path):
    d = io.parse_scores_csv(write(tmp_path, "group,label,s0,s1\na,0,0.7,0.3\n"))
    assert (d.n, d.k, d.m) == (1, 2, 1)


def test_parse_unlabeled_row(tmp_path):
    d = io.parse_scores_csv(write(tmp_path, "group,label,s0,s1\na,,0.7,0.3\nb,1,0.2,0.8\n"))
    assert d.labels.tolist() == [-1, 1]
    assert not d.has_labels


@pytest.mark.parametrize("body, line", [
    ("group,label,s0,s1\na,0,NaN,0.3\n", "line 2"),
    ("group,label,s0,s1\na,0,0.5,0.5\nb,1,0.3\n", "line 3"),
    ("group,label,s0,s1\na,0,0.5,0.5\nb,2,0.3,0.7\n", "line 3"),
    ("group,label,s0,s1\na,0,inf,0.5\n", "line 2"),
    ("a,0,0.5,0.5\n", "line 1"),
])
def test_parse_errors_name_line(tmp_path, body, line):
    with pytest.raises(InvalidInputError) as info:
        io.parse_scores_csv(write(tmp_path, body))
    assert line in str(info.value)


def test_parse_empty_file(tmp_path):
    with pytest.raises(InvalidInputError):
        io.parse_scores_csv(write(tmp_path, ""))


def test_round_trip(tmp_path):
    d = generate(default_spec(k=4, m=3, n=30, seed=3))
    d = ScoredDataset(d.groups, d.scores, np.where(np.arange(d.n) % 7 == 0, -1, d.labels), d.group_names)
    path = tmp_path / "rt.csv"
    io.write_scores_csv(d, path)
    back = io.parse_scores_csv(path)
    assert back.group_names == d.group_names
    assert np.array_equal(back.groups, d.groups)
    assert np.array_equal(back.labels, d.labels)
    assert back.scores.tobytes() == d.scores.tobytes()


def test_run_config_consistency():
    with pytest.raises(UsageError):
        RunConfig(mode="nn", epsilon=0.1)
    with pytest.raises(UsageError):
        RunConfig(mode="smooth", round_digits=2)
    cfg = RunConfig(mode="smooth", epsilon=0.1)
    assert cfg.smoothing(3).epsilon == 0.1 and cfg.smoothing(3).eval_draws == 100
    assert RunConfig().smoothing(3) is None


def test_stats_fixture(capsys):
    code, out, _ = run(["stats", "--fixture", "adult_gender"], capsys)
    assert code == 0
    assert "dp_gap\t0.1945" in out
    assert "max_fair_accuracy\t90.2" in out


def test_stats_single_group(tmp_path):
    st = dataset_stats(write(tmp_path, "group,label,s0,s1\na,0,0.7,0.3\na,1,0.2,0.8\n"))
    assert st["dp_gap"] == 0.0
    assert st["max_fair_accuracy"] == pytest.approx(100.0)


def test_stats_needs_labels(tmp_path, capsys):
    path = write(tmp_path, "group,label,s0,s1\na,,0.7,0.3\n")
    with pytest.raises(LabelsRequiredError):
        dataset_stats(path)
    code, _, err = run(["stats", str(path)], capsys)
    assert code == 2 and err.startswith("error[labels-required]:")


def test_end_to_end(tmp_path, capsys):
    data = tmp_path / "s.csv"
    model = tmp_path / "m.json"
    pred = tmp_path / "p.csv"
    svg = tmp_path / "p.svg"
    assert run(["synth", "--n", "150", "--seed", "2", "--out", str(data)], capsys)[0] == 0
    code, out, _ = run(["fit", str(data), "--model", str(model), "--mode", "nn"], capsys)
    assert code == 0 and "objective" in out
    code, out, _ = run(["evaluate", str(data), "--model", str(model)], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0].split() == ["metric", "pre", "post", "delta"]
    assert lines[1].startswith("balanced_acc") and lines[2].startswith("dp_gap")
    post_gap = float(lines[2].split()[2])
    assert post_gap <= 2 * 6 / 150
    assert run(["apply", str(data), "--model", str(model), "--out", str(pred)], capsys)[0] == 0
    rows = pred.read_text().splitlines()
    assert rows[0] == "group,class,p0,p1,p2" and len(rows) == 301
    assert run(["plot", "--model", str(model), "--group", "g1", "--out", str(svg)], capsys)[0] == 0
    ET.parse(svg)


def test_smooth_cli(tmp_path, capsys):
    data = tmp_path / "s.csv"
    model = tmp_path / "m.json"
    run(["synth", "--n", "40", "--out", str(data)], capsys)
    code, out, _ = run(["fit", str(data), "--model", str(model), "--mode", "smooth",
                        "--epsilon", "0.05", "--fit-draws", "2", "--eval-draws", "10"], capsys)
    assert code == 0 and "mode\tsmooth" in out


def test_evaluate_unlabeled(tmp_path, capsys):
    data = write(tmp_path, "group,label,s0,s1\na,,0.7,0.3\nb,1,0.2,0.8\n")
    model = tmp_path / "m.json"
    assert run(["fit", str(data), "--model", str(model)], capsys)[0] == 0
    code, _, err = run(["evaluate", str(data), "--model", str(model)], capsys)
    assert code == 2 and err.startswith("error[labels-required]:")


@pytest.mark.parametrize("argv, code, prefix", [
    (["bogus"], 1, "error[usage]:"),
    ([], 1, "error[usage]:"),
    (["fit", "x.csv", "--model", "m.json", "--epsilon", "0.1"], 1, "error[usage]:"),
    (["fit", "missing.csv", "--model", "m.json"], 2, "error[invalid-input]:"),
    (["stats"], 1, "error[usage]:"),
    (["plot", "--psi", "0,0", "--out", "x.svg"], 1, "error[unsupported-dimension]:"),
    (["fit", "x.csv", "--model", "m.json", "--weights", "a,b"], 1, "error[usage]:"),
])
def test_error_lines(argv, code, prefix, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    got, _, err = run(argv, capsys)
    assert got == code
    assert err.startswith(prefix)
    assert err.count("\n") == 1


def test_geometry_failure_exit_code(tmp_path, capsys, monkeypatch):
    from dpot import pipeline
    from dpot.errors import GeometryInfeasibleError

    def boom(*a, **k):
        raise GeometryInfeasibleError("halfspaces do not intersect", margin=-1.0)

    monkeypatch.setattr(pipeline, "nn_from_plan", boom)
    data = write(tmp_path, "group,label,s0,s1\na,0,0.7,0.3\n")
    code, _, err = run(["fit", str(data), "--model", str(tmp_path / "m.json"), "--mode", "nn"], capsys)
    assert code == 3 and err.startswith("error[geometry-infeasible]:")


def test_unknown_group_exit(tmp_path, capsys):
    train = write(tmp_path, "group,label,s0,s1\na,0,0.7,0.3\n", "train.csv")
    other = write(tmp_path, "group,label,s0,s1\nz,0,0.7,0.3\n", "other.csv")
    model = tmp_path / "m.json"
    run(["fit", str(train), "--model", str(model)], capsys)
    code, _, err = run(["apply", str(other), "--model", str(model), "--out", str(tmp_path / "o.csv")], capsys)
    assert code == 2 and err.startswith("error[unknown-group]:")


def test_bench_small(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code, out, _ = run(["bench", "--n", "40,80", "--holdout", "500", "--seeds", "2",
                        "--reference-n", "80", "--out", str(out_csv)], capsys)
    assert code == 0 and "slope" in out
    assert out_csv.read_text().startswith("n,seed,dp_gap,excess_error")


def test_pmf_table_parse(tmp_path):
    t = io.parse_pmf_table(write(tmp_path, "group,count,c0,c1\nx,10,80,20\ny,5,0.5,0.5\n"))
    np.testing.assert_allclose(t.pmfs, [[0.8, 0.2], [0.5, 0.5]])
    with pytest.raises(InvalidInputError):
        io.parse_pmf_table(write(tmp_path, "group,count,c0,c1\nx,10,-1,2\n", "bad.csv"))
