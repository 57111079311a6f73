import csv
import json

import numpy as np
import pytest

from disc import cli
from disc.data_io import DataMatrix, load_csv, read_labels, save_csv
from disc.errors import NumericError

from test_downstream import two_class_toy


def read_csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def toy_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    assert cli.main(["synth", "--n", "1500", "--seed", "0", "--out", str(out)]) == 0
    return out


def test_synth_writes_files_and_truth(toy_files):
    truth = json.loads((toy_files / "ground_truth.json").read_text())
    assert truth["a"] == list(range(150, 200)) and truth["b"] == list(range(200, 250))
    assert load_csv(toy_files / "a.csv").shape == (1500, 250)


def test_run_outputs(toy_files, tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["run", str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--out", str(out),
                     "--clusters", "3", "--dump-graph"])
    assert code == 0
    for name in ("v_a.csv", "v_b.csv", "sigma_a.csv", "sigma_b.csv", "summary.json", "clusters.csv",
                 "w_a.csv", "w_b.csv"):
        assert (out / name).exists(), name
    s = json.loads((out / "summary.json").read_text())
    for key in ("d_a", "d_b", "kernel", "knn_k", "seed", "n_a", "n_b", "p", "r", "checksums"):
        assert key in s
    assert s["d_a"] == 20 and s["r"] == 10 and s["seed"] == 0 and s["knn_k"] == 6
    assert s["elbow_a"] == 2 and s["elbow_b"] == 2
    rows = read_csv_rows(out / "v_a.csv")
    assert rows[0] == ["feature_id"] + [f"v{i}" for i in range(1, 11)]
    V = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    assert (V[150:200, :2] ** 2).sum() / 2 >= 0.8
    assert read_csv_rows(out / "clusters.csv")[0] == ["feature_id", "label_a", "label_b"]
    assert "sigma_a" in capsys.readouterr().out


def test_same_file_twice(toy_files, tmp_path):
    a = str(toy_files / "a.csv")
    assert cli.main(["run", a, a, "--out", str(tmp_path), "--r", "4"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["sigma_a"] == s["sigma_b"]


def test_rerun_is_bitwise_identical(toy_files, tmp_path):
    args = [str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--r", "3"]
    assert cli.main(["run", *args, "--out", str(tmp_path / "x")]) == 0
    assert cli.main(["run", *args, "--out", str(tmp_path / "y")]) == 0
    for name in ("v_a.csv", "sigma_b.csv"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_mismatched_headers_exit_1(tmp_path, capsys):
    save_csv(DataMatrix(np.random.default_rng(0).random((5, 3)), ("a", "b", "c")), tmp_path / "x.csv")
    save_csv(DataMatrix(np.random.default_rng(1).random((5, 3)), ("a", "b", "d")), tmp_path / "y.csv")
    code = cli.main(["run", str(tmp_path / "x.csv"), str(tmp_path / "y.csv"), "--out", str(tmp_path / "o"),
                     "--d-a", "2", "--d-b", "2"])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "missing from B" in err[0]


def test_parse_error_exit_1(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,x\n2,3\n")
    assert cli.main(["run", str(tmp_path / "bad.csv"), str(tmp_path / "bad.csv"), "--out", str(tmp_path)]) == 1


def test_numeric_failure_exit_2(toy_files, tmp_path, monkeypatch):
    import disc.spectral

    def boom(*a, **k):
        raise NumericError("did not converge")

    monkeypatch.setattr(disc.spectral, "disc_pair", boom)
    code = cli.main(["run", str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--out", str(tmp_path)])
    assert code == 2


def test_usage_error_exit_1():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run"])
    assert exc.value.code == 1


def test_zscore_and_fixed_kernel(toy_files, tmp_path):
    code = cli.main(["run", str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--out", str(tmp_path),
                     "--zscore", "--kernel", "fixed", "--bandwidth", "60", "--r", "2"])
    assert code == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["zscore"] is True and s["kernel"] == "rbf_fixed" and s["bandwidth"] == 60


def test_thread_env(toy_files, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert cli.main(["run", str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--out", str(tmp_path),
                     "--r", "2"]) == 0
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    assert cli.main(["run", str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--out", str(tmp_path)]) == 1


def test_cluster_command(toy_files, tmp_path):
    run = tmp_path / "run"
    assert cli.main(["run", str(toy_files / "a.csv"), str(toy_files / "b.csv"), "--out", str(run)]) == 0
    assert cli.main(["cluster", str(run), "--tag", "b", "--k", "3"]) == 0
    ids, labels = read_labels(run / "clusters.csv")
    assert len(ids) == 250 and set(labels) == {0, 1, 2}
    assert json.loads((run / "summary.json").read_text())["cluster_vectors"] == 2


def test_multi_command(tmp_path):
    data = tmp_path / "m"
    assert cli.main(["synth", "--problem", "multi3", "--n", "1500", "--out", str(data)]) == 0
    out = tmp_path / "o"
    files = [str(data / f"{x}.csv") for x in "abc"]
    assert cli.main(["multi", *files, "--d", "20", "--out", str(out), "--r", "4"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["dropped_columns"] == [1, 1, 1]
    assert all((out / f"v_{m}.csv").exists() for m in (1, 2, 3))


def test_sbm_validate_small_grid(tmp_path):
    args = ["sbm-validate", "--l", "100", "200", "400", "--alpha", "0.7", "0.9", "--trials", "2",
            "--recovery-trials", "2"]
    assert cli.main([*args, "--out", str(tmp_path / "x")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "y")]) == 0
    rows = read_csv_rows(tmp_path / "x" / "slopes.csv")
    assert rows[0] == ["alpha", "quantity", "fitted_slope", "theoretical_slope"]
    assert len(rows) == 1 + 2 * 2
    for name in ("slopes.csv", "sbm_records.csv", "recovery.csv"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_sbm_validate_single_l_exit_1(tmp_path):
    assert cli.main(["sbm-validate", "--l", "500", "--out", str(tmp_path)]) == 1


def _write_eval_files(tmp_path, shuffle=False):
    train, test, y = two_class_toy()
    paths = {"train": [], "test": []}
    for c, data in enumerate(train):
        save_csv(data, tmp_path / f"train{c}.csv")
        paths["train"].append(str(tmp_path / f"train{c}.csv"))
        save_csv(DataMatrix(test[y == c]), tmp_path / f"test{c}.csv")
        paths["test"].append(str(tmp_path / f"test{c}.csv"))
    return paths


def test_eval_two_class_toy(tmp_path, capsys):
    paths = _write_eval_files(tmp_path)
    code = cli.main(["eval", "--train", *paths["train"], "--test", *paths["test"], "--k-clusters", "3",
                     "--out", str(tmp_path / "o")])
    assert code == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["accuracy"]["20"] >= 0.9
    assert "accuracy=" in capsys.readouterr().out


def test_eval_shuffled_labels_is_chance(tmp_path):
    paths = _write_eval_files(tmp_path)
    code = cli.main(["eval", "--train", *paths["train"], "--test", *paths["test"], "--k-clusters", "3",
                     "--shuffle-labels", "--out", str(tmp_path / "o")])
    assert code == 0
    acc = json.loads((tmp_path / "o" / "summary.json").read_text())["accuracy"]["20"]
    assert abs(acc - 0.5) <= 0.1
