import json
import subprocess
import sys

import numpy as np
import pytest

from acttend import nn
from acttend.cli import main
from acttend.datagen import read_dataset

FAST_TRAIN = ["--n-datasets", "8", "--epochs", "1", "--hidden", "4", "--n-min", "30", "--n-max", "40"]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("ck") / "model.json"
    assert main(["train", "--dims", "2", *FAST_TRAIN, "--seed", "3", "--out", str(out)]) == 0
    return out


def test_gen_shape_and_idempotent(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, _ = run(["gen", "--n", 200, "--dim", 5, "--clustered", "--seed", 7, "--out", out], capsys)
    assert code == 0
    ds = read_dataset(out)
    assert ds.points.shape == (200, 5) and ds.label is True
    first = out.read_bytes(), (tmp_path / "d.csv.json").read_bytes()
    run(["gen", "--n", 200, "--dim", 5, "--clustered", "--seed", 7, "--out", out], capsys)
    assert (out.read_bytes(), (tmp_path / "d.csv.json").read_bytes()) == first


def test_gen_uniform(tmp_path, capsys):
    out = tmp_path / "u.csv"
    assert run(["gen", "--n", 50, "--dim", 2, "--uniform", "--out", out], capsys)[0] == 0
    assert read_dataset(out).label is False


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "--n", "20", "--dim", "0", "--clustered"],
        ["gen", "--n", "20", "--dim", "2", "--clustered", "--out", "/nonexistent/dir/x.csv"],
        ["gen", "--n", "20", "--dim", "2", "--clustered", "--k-max", "15"],
    ],
)
def test_gen_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_unknown_flag_is_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--n", "5", "--dim", "2", "--bogus"])
    assert exc.value.code == 2


@pytest.mark.parametrize("sub", [[], ["gen"], ["train"], ["assess"], ["bench"], ["bench", "dims"], ["bench", "mnist"], ["bench", "grid"]])
def test_help_everywhere(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main([*sub, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_train_defaults_and_checkpoint(checkpoint):
    params = nn.load_checkpoint(checkpoint)
    gcfg = params.extra["graph_config"]
    assert gcfg["strategy"] == {"kind": "rbf", "sigma": 2.0}
    assert gcfg["neighbor_pct"] == 0.6
    assert checkpoint.with_suffix(".log.csv").exists()


def test_train_missing_output_dir(capsys):
    assert run(["train", *FAST_TRAIN, "--out", "/nonexistent/dir/m.json"], capsys)[0] == 2


def test_assess_outputs(tmp_path, checkpoint, capsys):
    data = tmp_path / "u.csv"
    main(["gen", "--n", "80", "--dim", "2", "--uniform", "--seed", "1", "--out", str(data)])
    capsys.readouterr()
    code, cap = run(["assess", data, "--checkpoint", checkpoint, "--with-baselines", "--json", tmp_path / "r.json"], capsys)
    assert code == 0
    rows = [json.loads(line) for line in cap.out.splitlines()]
    assert [r["method"] for r in rows] == ["gnn", "hopkins", "silhouette"]
    assert 0.0 <= rows[1]["score"] <= 1.0
    assert json.loads((tmp_path / "r.json").read_text())["results"] == rows


def test_assess_dim_mismatch(tmp_path, checkpoint, capsys):
    data = tmp_path / "d3.csv"
    main(["gen", "--n", "60", "--dim", "3", "--uniform", "--out", str(data)])
    assert run(["assess", data, "--checkpoint", checkpoint], capsys)[0] == 1
    assert run(["assess", data, "--checkpoint", checkpoint, "--allow-dim-mismatch"], capsys)[0] == 0


def test_assess_missing_checkpoint(tmp_path, capsys):
    data = tmp_path / "d.csv"
    main(["gen", "--n", "30", "--dim", "2", "--uniform", "--out", str(data)])
    code, cap = run(["assess", data, "--checkpoint", tmp_path / "none.json"], capsys)
    assert code == 1 and "none.json" in cap.err


def test_bench_dims(tmp_path, capsys):
    code, cap = run(
        ["bench", "dims", "--dims", "2,30", "--n-test", 4, *FAST_TRAIN, "--hopkins-thresholds", "0.75",
         "--silhouette-thresholds", "0.5", "--out-dir", tmp_path],
        capsys,
    )
    assert code == 0
    rows = [json.loads(line) for line in cap.out.splitlines()]
    assert sorted((r["dim"], r["method"]) for r in rows) == sorted((d, m) for d in (2, 30) for m in ("gnn", "hopkins", "silhouette"))
    obj = json.loads((tmp_path / "dims.json").read_text())
    assert obj["config"]["cli"]["n_test"] == 4
    assert (tmp_path / "dims.csv").read_text().startswith("# config:")


def test_bench_mnist_missing_files(tmp_path, checkpoint, capsys):
    code, cap = run(["bench", "mnist", "--mnist-dir", tmp_path, "--checkpoint", checkpoint, "--out-dir", tmp_path], capsys)
    assert code == 1 and "missing MNIST file" in cap.err
    assert run(["bench", "mnist", "--checkpoint", checkpoint, "--out-dir", tmp_path], capsys)[0] == 2


def test_bench_mnist_on_fixture(tmp_path, capsys):
    from acttend.mnist import write_idx_images, write_idx_labels

    rng = np.random.default_rng(0)
    protos = rng.integers(0, 256, size=(3, 8, 8))
    imgs = np.clip(protos[rng.integers(0, 3, 300)] + rng.integers(-20, 20, size=(300, 8, 8)), 0, 255)
    write_idx_images(tmp_path / "train-images-idx3-ubyte", imgs)
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte", np.zeros(300))
    ck = tmp_path / "m5.json"
    main(["train", "--dims", "5", *FAST_TRAIN, "--out", str(ck)])
    capsys.readouterr()
    code, cap = run(
        ["bench", "mnist", "--variant", "2", "--mnist-dir", tmp_path, "--checkpoint", ck, "--pca-dims", 5,
         "--fit-size", 300, "--p-grid", "0,50,100", "--out-dir", tmp_path],
        capsys,
    )
    assert code == 0, cap.err
    assert len(cap.out.splitlines()) == 3
    assert (tmp_path / "mnist.json").exists()


def test_bench_grid(tmp_path, capsys):
    code, cap = run(
        ["bench", "grid", "--strategies", "unweighted,rbf:2", "--pcts", "0.1,0.6", "--n-datasets", 6, "--n-test", 4,
         "--n-min", 30, "--n-max", 40, "--epochs", 1, "--out-dir", tmp_path],
        capsys,
    )
    assert code == 0
    assert cap.out.splitlines()[0] == "strategy,10,60"
    assert (tmp_path / "heatmap.csv").read_text() == cap.out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "acttend", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "assess" in res.stdout
