import csv
import json

import numpy as np
import pytest

from datasuite.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, dumps, main


def _write(path, X, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "c", "colour", "label"])
        for row, lab in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + ["red" if row[0] > 0 else "blue", "yes" if lab else "no"])


@pytest.fixture
def csvs(tmp_path):
    rng = np.random.default_rng(7)
    X = rng.multivariate_normal([0, 0, 0], [[1, 0.5, 0], [0.5, 1, 0.3], [0, 0.3, 1]], size=240)
    y = X[:, 0] + 0.5 * rng.normal(size=240) > 0
    _write(tmp_path / "train.csv", X[:120], y[:120])
    _write(tmp_path / "test.csv", X[120:], y[120:])
    return tmp_path / "train.csv", tmp_path / "test.csv"


def _run_args(csvs, out, *extra):
    train, test = csvs
    return ["run", "--train", str(train), "--test", str(test), "--label", "label",
            "--seed", "0", "--n-trees", "10", "--out", str(out), *extra]


RUN_FILES = {
    "model.json", "fit_report.json", "intervals.csv", "stratification.json",
    "ranking.csv", "projection.csv", "metrics.json", "accuracy_curve.csv",
}


def test_run_writes_all_artifacts(csvs, tmp_path):
    out = tmp_path / "run"
    assert main(_run_args(csvs, out)) == EXIT_OK
    assert RUN_FILES <= {p.name for p in out.iterdir()}
    metrics = json.loads((out / "metrics.json").read_text())
    assert -1.0 <= metrics["mpi"]["mpi"] <= 1.0
    assert metrics["seed"] == 0 and metrics["command"] == "run" and len(metrics["config_hash"]) == 16
    report = json.loads((out / "fit_report.json").read_text())
    assert report["features"] == ["a", "b", "c", "colour=blue", "colour=red"]


def test_run_is_byte_identical(csvs, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(_run_args(csvs, a)) == EXIT_OK
    assert main(_run_args(csvs, b)) == EXIT_OK
    for name in RUN_FILES:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_reloaded_model_reproduces_ranking(csvs, tmp_path):
    out = tmp_path / "run"
    assert main(_run_args(csvs, out)) == EXIT_OK
    again = tmp_path / "again"
    assert main(["stratify", "--model", str(out / "model.json"), "--test", str(csvs[1]),
                 "--seed", "0", "--out", str(again)]) == EXIT_OK
    assert (out / "ranking.csv").read_bytes() == (again / "ranking.csv").read_bytes()


def test_missing_seed_is_usage_error(csvs, tmp_path, capsys):
    args = [a for a in _run_args(csvs, tmp_path / "x") if a not in ("--seed", "0")]
    assert main(args) == EXIT_USAGE
    assert "seed" in capsys.readouterr().err


def test_unknown_option_is_usage_error(tmp_path):
    assert main(["fit", "--bogus", "1"]) == EXIT_USAGE


def test_missing_file_is_data_error(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["fit", "--train", str(tmp_path / "nope.csv"), "--seed", "0", "--out", str(out)])
    assert code == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_failure_rolls_back_partial_artifacts(csvs, tmp_path):
    train, _ = csvs
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    out = tmp_path / "o"
    code = main(["run", "--train", str(train), "--test", str(bad), "--label", "label",
                 "--seed", "0", "--out", str(out)])
    assert code == EXIT_DATA
    assert not out.exists() or not any(out.iterdir())


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_config_file_and_flag_precedence(csvs, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.2, "seed": 3, "augmentation": "none"}))
    out = tmp_path / "o"
    assert main(["fit", "--config", str(cfg), "--train", str(csvs[0]), "--label", "label",
                 "--alpha", "0.1", "--out", str(out)]) == EXIT_OK
    model = json.loads((out / "model.json").read_text())
    conf = model["suite"]["config"]
    assert conf["alpha"] == 0.1 and conf["seed"] == 3 and conf["augmentation"] == "none"


def test_config_file_rejects_unknown_key(csvs, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 0, "alhpa": 0.1}))
    assert main(["fit", "--config", str(cfg), "--train", str(csvs[0]), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_synth_bench_json(tmp_path):
    out = tmp_path / "sb"
    assert main(["synth-bench", "--synth", "Da_p50", "--seed", "0", "--repeats", "2", "--out", str(out)]) == EXIT_OK
    payload = json.loads((out / "synth_bench.json").read_text())
    res = payload["results"]["Da_p50"]
    assert len(res["runs"]) == 2
    assert res["summary"]["certain_mse"]["mean"] < res["summary"]["inconsistent_mse"]["mean"]


def test_synth_bench_unknown_config(tmp_path):
    assert main(["synth-bench", "--synth", "Dz", "--seed", "0", "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_lambda_sweep_csv(tmp_path):
    out = tmp_path / "ls"
    assert main(["lambda-sweep", "--synth", "Da_p50", "--seed", "1", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "lambda_sweep.csv")))
    assert [float(r["lambda"]) for r in rows] == [round(0.1 * k, 1) for k in range(11)]
    flagged = [int(r["flagged"]) for r in rows]
    assert all(a >= b for a, b in zip(flagged, flagged[1:]))


def test_lambda_sweep_on_data(csvs, tmp_path):
    out = tmp_path / "run"
    assert main(_run_args(csvs, out)) == EXIT_OK
    sweep = tmp_path / "sweep"
    assert main(["lambda-sweep", "--model", str(out / "model.json"), "--test", str(csvs[1]),
                 "--train", str(csvs[0]), "--seed", "0", "--n-trees", "10", "--out", str(sweep)]) == EXIT_OK
    assert (sweep / "lambda_sweep.csv").read_text().startswith("lambda,flagged,accuracy\n")


def test_dumps_is_canonical():
    text = dumps({"b": float("nan"), "a": [1.0, float("inf")]})
    assert json.loads(text) == {"a": [1.0, None], "b": None}
    assert text.index('"a"') < text.index('"b"')
