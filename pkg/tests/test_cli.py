import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from emcwm.cli import main

from test_metrics import CRABS_CONFUSION, labels_from_confusion


@pytest.fixture
def runner():
    return CliRunner()


def _simulate(runner, path, n=120, seed=3):
    res = runner.invoke(
        main, ["simulate", "--preset", "dataset1", "--n", str(n),
               "--seed", str(seed), "--out", str(path)]
    )
    assert res.exit_code == 0, res.output
    return path


def _write_labels(path, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"])
        for v in labels:
            w.writerow([v])


# ---------------------------------------------------------------------------
# simulate


def test_simulate_writes_plausible_csv(runner, tmp_path):
    out = _simulate(runner, tmp_path / "d.csv", n=250, seed=7)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["x1", "x2", "y1", "y2", "label"]
    assert len(rows) == 251
    labels = np.array([r[-1] for r in rows[1:]], dtype=int)
    prop = np.mean(labels == 0)
    assert abs(prop - 0.35) <= 3 * np.sqrt(0.35 * 0.65 / 250)


def test_simulate_same_seed_identical_files(runner, tmp_path):
    a = _simulate(runner, tmp_path / "a.csv", seed=11)
    b = _simulate(runner, tmp_path / "b.csv", seed=11)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_rejects_bad_flags(runner, tmp_path):
    res = runner.invoke(main, ["simulate", "--preset", "dataset1", "--n", "0",
                               "--out", str(tmp_path / "x.csv")])
    assert res.exit_code == 2
    res = runner.invoke(main, ["simulate", "--n", "5",
                               "--out", str(tmp_path / "x.csv")])
    assert res.exit_code == 2
    assert "validation" in res.output


def test_simulate_from_params_file(runner, tmp_path):
    params = {
        "structure_y": "VVV",
        "structure_x": "VVV",
        "components": [
            {"weight": 1.0, "mean_x": [0.0], "cov_x": [[1.0]],
             "coeffs": [[0.0], [1.0]], "cov_y": [[1.0]]},
        ],
    }
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps(params))
    out = tmp_path / "d.csv"
    res = runner.invoke(main, ["simulate", "--params", str(pfile), "--n", "30",
                               "--seed", "1", "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["x1", "y1", "label"]
    assert len(rows) == 31


# ---------------------------------------------------------------------------
# fit


def test_fit_reports_perfect_recovery(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv", n=200, seed=5)
    out = tmp_path / "report.json"
    res = runner.invoke(main, [
        "fit", str(data), "--responses", "y1,y2", "--covariates", "x1,x2",
        "--labels", "label", "--g", "2", "--structure-y", "VEE",
        "--structure-x", "VII", "--out", str(out),
    ])
    assert res.exit_code == 0, res.output
    report = json.loads(out.read_text())
    assert report["schema"] == "emcwm-report/1"
    assert report["result"]["converged"] is True
    assert report["metrics"]["ari"] == 1.0
    # (G-1) + G*p + VII(p=2,G=2) + G*d*(1+p) + VEE(d=2,G=2) = 1+4+2+12+4
    assert report["result"]["n_params"] == 23
    # report echoes everything needed to replay the run
    assert report["spec"]["seed"] == 0 and report["spec"]["g"] == 2


def test_fit_replays_identically(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv", n=150, seed=2)
    args = ["fit", str(data), "--responses", "y1,y2", "--covariates", "x1,x2",
            "--g", "2", "--no-timing"]
    r1 = runner.invoke(main, args)
    r2 = runner.invoke(main, args)
    assert r1.exit_code == 0 and r1.output == r2.output


def test_fit_numerical_failure_exit_code(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv", n=20, seed=1)
    res = runner.invoke(main, [
        "fit", str(data), "--responses", "y1,y2", "--covariates", "x1,x2",
        "--g", "9",
    ])
    assert res.exit_code == 3
    assert "numerical" in res.output


def test_fit_missing_column_exit_code(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv")
    res = runner.invoke(main, [
        "fit", str(data), "--responses", "nope", "--covariates", "x1,x2",
        "--g", "2",
    ])
    assert res.exit_code == 2
    assert "missing column" in res.output


# ---------------------------------------------------------------------------
# search


def test_search_single_cell_report(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv", n=150, seed=9)
    res = runner.invoke(main, [
        "search", str(data), "--responses", "y1,y2", "--covariates", "x1,x2",
        "--labels", "label", "--g-min", "2", "--g-max", "2",
        "--structures-y", "VEE", "--structures-x", "VII",
    ])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert len(report["result"]["table"]) == 1
    assert report["result"]["best"]["structure_y"] == "VEE"
    assert report["result"]["best"]["g"] == 2
    assert report["metrics"]["ari"] == 1.0


def test_search_reports_are_thread_invariant(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv", n=100, seed=6)
    base = ["search", str(data), "--responses", "y1,y2",
            "--covariates", "x1,x2", "--g-min", "1", "--g-max", "2",
            "--structures-y", "VEE,EEE", "--structures-x", "VII,EEE",
            "--no-timing"]
    seq = runner.invoke(main, base + ["--threads", "1"])
    par = runner.invoke(main, base + ["--threads", "2"])
    assert seq.exit_code == 0 and par.exit_code == 0
    seq_rep = json.loads(seq.output)
    par_rep = json.loads(par.output)
    # the spec echo records the thread count nowhere; reports must be identical
    assert seq_rep == par_rep
    assert seq.output == par.output


def test_search_rejects_unknown_structure(runner, tmp_path):
    data = _simulate(runner, tmp_path / "d.csv")
    res = runner.invoke(main, [
        "search", str(data), "--responses", "y1,y2", "--covariates", "x1,x2",
        "--structures-y", "ZZZ",
    ])
    assert res.exit_code == 2


# ---------------------------------------------------------------------------
# eval


def test_eval_identical_files(runner, tmp_path):
    t = tmp_path / "t.csv"
    _write_labels(t, [0, 0, 1, 1, 2])
    res = runner.invoke(main, ["eval", str(t), str(t)])
    assert res.exit_code == 0
    assert json.loads(res.output)["metrics"]["ari"] == 1.0


def test_eval_published_crabs_confusion(runner, tmp_path):
    truth, est = labels_from_confusion(CRABS_CONFUSION)
    t, p = tmp_path / "t.csv", tmp_path / "p.csv"
    _write_labels(t, truth)
    _write_labels(p, est)
    res = runner.invoke(main, ["eval", str(t), str(p)])
    assert res.exit_code == 0
    assert round(json.loads(res.output)["metrics"]["ari"], 2) == 0.82


def test_eval_length_mismatch(runner, tmp_path):
    t, p = tmp_path / "t.csv", tmp_path / "p.csv"
    _write_labels(t, [0, 1])
    _write_labels(p, [0, 1, 1])
    res = runner.invoke(main, ["eval", str(t), str(p)])
    assert res.exit_code == 2
