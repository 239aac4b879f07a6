import hashlib
import json

import numpy as np
import pytest

from citypower.cli import main
from citypower.dataset import Dataset, write_csv
from citypower.schema import default_schema, save_schema

from conftest import make_schema

FAST = ["--max-epochs", "60", "--restarts", "2"]


def run(*args):
    return main([str(a) for a in args])


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture
def pipeline(tmp_path):
    d = tmp_path / "run"
    assert run("gen", "--out", d, "--seed", 3, "--n-cities", 80) == 0
    assert run("split", "--data", d / "cities.csv", "--testb-ids", d / "testb_ids.txt",
               "--seed", 3, "--out", d) == 0
    assert run("train", "--data", d / "cities.csv", "--split", d / "split.json", "--seed", 3,
               "--out", d, *FAST) == 0
    return d


def test_full_pipeline(pipeline, capsys):
    d = pipeline
    assert len((d / "testb_ids.txt").read_text().split()) == 20
    assert run("eval", "--data", d / "cities.csv", "--split", d / "split.json",
               "--model", d / "model.json", "--out", d) == 0
    metrics = json.loads((d / "metrics.json").read_text())
    assert set(metrics) == {"train", "val", "testA", "testB"}
    assert metrics["testB"]["n"] == 20
    assert run("pi", "--data", d / "cities.csv", "--model", d / "model.json", "--out", d,
               "--pi-reps", 3, "--pi-features", "area of land,Total telecom business") == 0
    pi = json.loads((d / "pi.json").read_text())
    assert sorted(s["feature"] for s in pi["scores"]) == ["Total telecom business", "area of land"]
    assert pi["repetitions"] == 3 and len(pi["ids"]) == 80
    assert run("report", "--data", d / "cities.csv", "--split", d / "split.json",
               "--model", d / "model.json", "--out", d, "--no-timestamp") == 0
    for name in ("testb_comparison.svg", "testb_scatter.svg", "training_curve.svg"):
        assert (d / name).read_text().startswith("<?xml")
    out = capsys.readouterr().out
    assert "PI Score" in out and "R^2" in out


def test_pi_group_uses_split(pipeline):
    d = pipeline
    assert run("pi", "--data", d / "cities.csv", "--model", d / "model.json", "--split", d / "split.json",
               "--pi-group", "testB", "--pi-reps", 2, "--out", d / "pi_b") == 0
    assert len(json.loads((d / "pi_b" / "pi.json").read_text())["ids"]) == 20


def test_schema_mismatch_is_config_error(pipeline, tmp_path, capsys):
    d = pipeline
    schema = default_schema()
    other = schema.subset(list(reversed(schema.names)))
    save_schema(other, tmp_path / "other.json")
    code = run("eval", "--data", d / "cities.csv", "--schema", tmp_path / "other.json",
               "--split", d / "split.json", "--model", d / "model.json", "--out", d)
    assert code == 2
    err = _error(capsys)
    assert err["error"] == "ConfigError" and "schema" in err["message"]


def test_split_command_reference_sizes(tmp_path, capsys):
    schema = make_schema(2)
    rng = np.random.default_rng(0)
    ids = tuple(f"c{i:03d}" for i in range(269))
    write_csv(Dataset(schema, ids, rng.uniform(0, 1, (269, 2)), rng.uniform(0, 1, 269)), tmp_path / "d.csv")
    save_schema(schema, tmp_path / "s.json")
    (tmp_path / "b.txt").write_text("\n".join(ids[::5][:49]) + "\n")
    assert run("split", "--data", tmp_path / "d.csv", "--schema", tmp_path / "s.json",
               "--testb-ids", tmp_path / "b.txt", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "split.json").read_text())
    assert doc["counts"] == {"train": 202, "val": 9, "testA": 9, "testB": 49}


def test_config_file_and_flag_precedence(tmp_path):
    run("gen", "--out", tmp_path, "--n-cities", 30, "--testb-size", 5)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"data": "cities.csv", "testb-ids": "testb_ids.txt", "seed": 5,
                               "val_fraction": 0.2, "out": "a"}))
    assert run("split", "--config", cfg) == 0
    assert json.loads((tmp_path / "a" / "split.json").read_text())["seed"] == 5
    assert json.loads((tmp_path / "a" / "split.json").read_text())["counts"]["val"] == 5
    assert run("split", "--config", cfg, "--seed", 7, "--out", tmp_path / "b") == 0
    assert json.loads((tmp_path / "b" / "split.json").read_text())["seed"] == 7


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"learning-rate": 3}')
    assert run("split", "--config", cfg) == 2
    assert _error(capsys)["error"] == "ConfigError"


def test_missing_input_is_io_error(tmp_path, capsys):
    assert run("split", "--data", tmp_path / "nope.csv", "--out", tmp_path) == 3
    assert _error(capsys)["exit_code"] == 3


def test_bad_data_is_data_error(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("city_id,f0,f1,consumption\na,1,x,3\n")
    save_schema(make_schema(2), tmp_path / "s.json")
    assert run("split", "--data", tmp_path / "d.csv", "--schema", tmp_path / "s.json",
               "--out", tmp_path) == 4
    err = _error(capsys)
    assert err["error"] == "UnparseableCell"


def test_divergence_is_training_error(pipeline, capsys):
    d = pipeline
    code = run("train", "--data", d / "cities.csv", "--split", d / "split.json", "--out", d / "x",
               "--activation", "purelin", "--lr", 1e9, "--max-epochs", 50)
    assert code == 5
    assert _error(capsys)["error"] == "DivergenceDetected"


def test_commands_do_not_touch_inputs_and_are_idempotent(pipeline):
    d = pipeline
    inputs = [d / "cities.csv", d / "split.json", d / "model.json", d / "trace.csv"]
    before = [hashlib.sha256(p.read_bytes()).hexdigest() for p in inputs]
    outputs = []
    for k in range(2):
        out = d / f"eval{k}"
        run("eval", "--data", d / "cities.csv", "--split", d / "split.json", "--model", d / "model.json",
            "--out", out)
        outputs.append((out / "metrics.json").read_bytes())
    assert outputs[0] == outputs[1]
    assert before == [hashlib.sha256(p.read_bytes()).hexdigest() for p in inputs]


def test_missing_required_flag(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "x.csv") in (2, 3)
    with pytest.raises(SystemExit):
        main(["bogus"])
