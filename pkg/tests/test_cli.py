import csv
import json

import pytest

from fairpul.cli import main

from test_harness import SMALL_SPEC, small_config


def write_config(tmp_path, **overrides):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(small_config(**overrides)))
    return path


def test_synth_writes_a_csv(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SMALL_SPEC))
    out = tmp_path / "syn.csv"
    assert main(["synth", "--spec", str(spec), "--seed", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 510
    assert set(rows[0]) == {"x0", "x1", "s", "y"}
    first = out.read_text()
    main(["synth", "--spec", str(spec), "--seed", "4", "--out", str(out)])
    assert out.read_text() == first


def test_run_then_predict(tmp_path, capsys):
    cfg = write_config(tmp_path, rates=[0.8], trials=1, methods=["fairpul-eop", "naive"])
    report = tmp_path / "r.json"
    models = tmp_path / "models"
    code = main(["run", "--config", str(cfg), "--out", str(report), "--format", "json",
                 "--model-out", str(models)])
    assert code == 0
    doc = json.loads(report.read_text())
    assert len(doc["records"]) == 2
    model = models / "fairpul-eop_rate0.8.json"
    assert model.is_file()

    data = tmp_path / "syn.csv"
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SMALL_SPEC))
    main(["synth", "--spec", str(spec), "--seed", "9", "--out", str(data)])
    # the saved schema names the synthetic columns
    preds = tmp_path / "p.csv"
    capsys.readouterr()
    assert main(["predict", "--model", str(model), "--data", str(data),
                 "--out", str(preds)]) == 0
    rows = list(csv.DictReader(preds.open()))
    assert len(rows) == 510
    assert {r["prediction"] for r in rows} <= {"0", "1"}
    assert "[eop]" in capsys.readouterr().err


def test_run_markdown_to_stdout(tmp_path, capsys):
    cfg = write_config(tmp_path, rates=[0.8], trials=1, methods=["naive"])
    assert main(["run", "--config", str(cfg), "--format", "md"]) == 0
    assert "### labeling rate 0.8" in capsys.readouterr().out


def test_bad_config_exits_with_one(tmp_path, capsys):
    cfg = write_config(tmp_path, rates=[1.5])
    assert main(["run", "--config", str(cfg)]) == 1
    assert "configuration error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    assert main(["run", "--config", str(write_config(tmp_path)), "--jobs", "0"]) == 1


def test_predict_with_missing_model_exits_with_one(tmp_path):
    assert main(["predict", "--model", str(tmp_path / "m.json"),
                 "--data", str(tmp_path / "d.csv")]) == 1


def test_runtime_failure_exits_with_two(tmp_path, capsys):
    # group 1 has no positives, so its true positive rate is undefined
    spec = {"cells": [c for c in SMALL_SPEC["cells"]
                      if not (c["group"] == 1 and c["label"] == 1)]}
    cfg = write_config(tmp_path, dataset={"kind": "synthetic", "synthetic": spec},
                       methods=["naive"], rates=[1.0], trials=1)
    assert main(["run", "--config", str(cfg)]) == 2
    assert "runtime failure" in capsys.readouterr().err


def test_unknown_subcommand_is_an_argparse_error():
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2
