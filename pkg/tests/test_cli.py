import csv
import io
import json

import numpy as np
import pytest

from treelab.cli import (CSV_COLUMNS, ConfigError, forest_from_dict, forest_to_dict, main,
                         parse_experiment, rows_to_csv, run_experiment)
from treelab.core import Dataset
from treelab.grower import GrowConfig, fit_forest
from treelab.splitters import InteractionForest, Oblique, Rsrf

SMALL = """
[model]
regression = example
d = 3
sigma = 0.1

[splitter:rsrf]
name = rsrf
W = 2
n_trees = 2

[splitter:cart]
name = cart
n_trees = 1

[experiment]
n = 200, 400
seeds = 0-1
even_depth = true
test_size = 500
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


def test_experiment_csv_is_deterministic(tmp_path):
    cfg = write(tmp_path, "small.ini", SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("experiment", "--config", cfg, "--out", a, "--no-timing") == 0
    assert run("experiment", "--config", cfg, "--out", b, "--no-timing") == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text())))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 2 * 2
    assert {r[2] for r in rows[1:]} == {"rsrf", "cart"}


def test_experiment_parallel_matches_serial():
    cfg = parse_experiment(SMALL)
    cfg.record_time = False
    assert rows_to_csv(run_experiment(cfg, 1)) == rows_to_csv(run_experiment(cfg, 2))


def test_bad_config_reports_line(tmp_path, capsys):
    bad = SMALL.replace("W = 2", "W = two")
    cfg = write(tmp_path, "bad.ini", bad)
    assert run("experiment", "--config", cfg) == 2
    err = capsys.readouterr().err
    line = bad.splitlines().index("W = two") + 1
    assert f"bad.ini:{line}" in err


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        parse_experiment(SMALL.replace("n = 200, 400", "n = "))
    with pytest.raises(ConfigError):
        parse_experiment(SMALL + "depth_c = 0.5\n")
    with pytest.raises(ConfigError):
        parse_experiment(SMALL + "depth = 3\n")
    with pytest.raises(ConfigError):
        parse_experiment("[model]\nregression = nope\n[experiment]\nn = 10\n[splitter]\nname = cart\n")


def test_missing_config_is_usage_error():
    assert run("experiment") == 2
    assert run("bogus-command") == 2
    assert run("sid-probe", "--seed", "-1") == 2


def test_verify_suite(capsys):
    assert run("verify", "recursions", "--no-timing") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert all(c["passed"] for c in report["checks"])


def test_sid_probe_constant(capsys):
    assert run("sid-probe", "--regression", "constant", "--cells", 20) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["delta_hat"] == 1.0 and rec["W_required"] == 1


def test_sid_probe_huge_alpha(capsys):
    assert run("sid-probe", "--alpha1", "1e9", "--cells", 50, "--grid-res", 20) == 0
    assert json.loads(capsys.readouterr().out)["delta_hat"] == 1.0


def test_sid_probe_example(tmp_path):
    out = tmp_path / "probe.json"
    assert run("sid-probe", "--alpha1", 50, "--cells", 500, "--grid-res", 50, "--seed", 0,
               "--out", out) == 0
    rec = json.loads(out.read_text())
    assert rec["delta_hat"] >= 0.6 - rec["half_width"]
    assert isinstance(rec["W_required"], int)


def test_grid_count(capsys):
    assert run("grid-count", "--g", 2, "--d", 2) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["cart"]["holds"] and rec["oblique"]["bound"] == 74


def _write_data(path, X, y=None):
    d = X.shape[1]
    header = [f"x{j}" for j in range(d)] + (["y"] if y is not None else [])
    rows = X if y is None else np.column_stack([X, y])
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="")


def test_fit_predict_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.random((300, 3))
    y = (X[:, 0] - 0.5) * (X[:, 1] - 0.5) + X[:, 2]
    train = tmp_path / "train.csv"
    _write_data(train, X, y)
    model = tmp_path / "model.json"
    assert run("fit", "--data", train, "--splitter", "rsrf", "--param", 3, "--depth", 4,
               "--trees", 3, "--seed", 5, "--out", model) == 0
    Xq = rng.random((50, 3))
    query = tmp_path / "query.csv"
    _write_data(query, Xq)
    pred = tmp_path / "pred.csv"
    assert run("predict", "--model", model, "--data", query, "--out", pred) == 0
    got = np.loadtxt(pred, delimiter=",", skiprows=1)
    want = fit_forest(Dataset(X, y), GrowConfig(4, Rsrf(3)), 3, 5).predict(Xq)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


@pytest.mark.parametrize("splitter", [InteractionForest(2), Oblique(3)])
def test_serialization_round_trip(splitter):
    rng = np.random.default_rng(1)
    data = Dataset(rng.random((200, 3)), rng.normal(size=200))
    forest = fit_forest(data, GrowConfig(3, splitter), 2, 9)
    again = forest_from_dict(json.loads(json.dumps(forest_to_dict(forest))))
    Xq = rng.random((100, 3))
    np.testing.assert_array_equal(forest.predict(Xq), again.predict(Xq))


def test_rejects_foreign_model():
    with pytest.raises(ConfigError):
        forest_from_dict({"format": "other"})


def test_noise_free_deep_cart_interpolates(tmp_path):
    cfg = write(tmp_path, "interp.ini", """
[model]
regression = additive
components = linear, quadratic, sin
d = 3
sigma = 0

[splitter]
name = cart
n_trees = 1

[experiment]
n = 2000
depth = 20
test_size = 100
""")
    out = tmp_path / "interp.csv"
    assert run("experiment", "--config", cfg, "--out", out, "--no-timing") == 0
    row = list(csv.DictReader(io.StringIO(out.read_text())))[0]
    assert float(row["train_mse"]) < 1e-3


def test_inline_comments_are_ignored():
    cfg = parse_experiment(SMALL.replace("regression = example", "regression = example  ; the interaction model")
                           .replace("seeds = 0-1", "seeds = 0-1  # two seeds"))
    assert cfg.seeds == [0, 1]
    assert cfg.model.to_dict()["regression"]["name"] == "example"
