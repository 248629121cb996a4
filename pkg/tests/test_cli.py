import csv
import json
import subprocess
import sys

import pytest

from afrisk.cli import build_parser, effective_config, load_config, main
from afrisk.errors import ValidationError

FAST = ["--folds", "3", "--repeats", "1"]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    d = {k: root / k for k in ("synth", "impute", "select", "balance", "train", "predict")}
    assert main(["synth", "--seed", "2", "--out", str(d["synth"])]) == 0
    raw = d["synth"] / "cohort.csv"
    assert main(["impute", "--cohort", str(raw), "--out", str(d["impute"])]) == 0
    imp = d["impute"] / "cohort_imputed.csv"
    assert main(["select", "--cohort", str(imp), "--out", str(d["select"])]) == 0
    assert main(["balance", "--cohort", str(imp), "--out", str(d["balance"])]) == 0
    report = d["select"] / "feature_report.csv"
    assert main(["train", "--cohort", str(imp), "--features", str(report), "--out", str(d["train"])]) == 0
    assert main(["predict", "--cohort", str(imp), "--model", str(d["train"] / "model.json"),
                 "--out", str(d["predict"])]) == 0
    return d


def test_synth_artifacts(pipeline):
    d = pipeline["synth"]
    for name in ("cohort.csv", "schema.json", "generator.json", "age_prevalence.csv", "config.json"):
        assert (d / name).is_file()
    rows = _read_csv(d / "cohort.csv")
    assert len(rows) == 831 and sum(r["af"] == "AF" for r in rows) == 191
    assert json.loads((d / "generator.json").read_text())["seed"] == 2


def test_impute_fills_everything(pipeline):
    rows = _read_csv(pipeline["impute"] / "cohort_imputed.csv")
    assert all(v != "" for r in rows for v in r.values())


def test_balance_summary(pipeline):
    s = json.loads((pipeline["balance"] / "balance_summary.json").read_text())
    assert s["input"] == {"NoAF": 640, "AF": 191}
    assert s["output"] == {"NoAF": 382, "AF": 382}


def test_predictions(pipeline):
    rows = _read_csv(pipeline["predict"] / "predictions.csv")
    assert len(rows) == 831
    for r in rows:
        p = float(r["p_af"])
        assert 0.0 <= p <= 1.0
        assert (r["predicted"] == "AF") == (p >= 0.5)
    model = json.loads((pipeline["train"] / "model.json").read_text())
    assert model["kind"] == "ensemble"


def test_config_record(pipeline):
    cfg = json.loads((pipeline["train"] / "config.json").read_text())
    assert cfg["command"] == "train" and cfg["strategy"] == "combined" and "out" not in cfg


def test_evaluate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evaluate", *FAST, "--out", str(a)]) == 0
    assert main(["evaluate", *FAST, "--out", str(b)]) == 0
    for name in ("runs.csv", "summary.json", "roc.csv", "config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert len(_read_csv(a / "runs.csv")) == 3
    assert "AUC" in capsys.readouterr().out


def test_compare_with_custom_set(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"feature_sets": {"mine": ["la_diameter", "age"]}, "folds": 3,
                               "repeats": 1, "classifier": "lr"}))
    assert main(["compare", "--config", str(cfg), "--sets", "mine,la-only", "--out", str(tmp_path / "o")]) == 0
    rows = _read_csv(tmp_path / "o" / "comparison.csv")
    assert [r["feature_set"] for r in rows] == ["mine", "la-only"]


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"seed": 4, "folds": 7}')
    args = build_parser().parse_args(["evaluate", "--folds", "3"])
    eff = effective_config(args, load_config(cfg))
    assert eff["folds"] == 3 and eff["seed"] == 4 and eff["strategy"] == "combined"


def test_out_from_environment(monkeypatch):
    monkeypatch.setenv("AFRISK_OUT", "/tmp/somewhere")
    eff = effective_config(build_parser().parse_args(["evaluate"]), {})
    assert eff["out"] == "/tmp/somewhere"


def test_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "seed": 1,\n  "bogus": 2\n}')
    with pytest.raises(ValidationError, match=r"c\.json:3: unknown config key"):
        load_config(p)
    p.write_text('{"resample": {"undersample_ratio": 0.2}}')
    with pytest.raises(ValidationError):
        load_config(p)
    p.write_text('{"folds": "five"}')
    with pytest.raises(ValidationError, match="wrong type"):
        load_config(p)


@pytest.mark.parametrize("argv", [
    ["impute", "--cohort", "/nonexistent.csv"],
    ["evaluate", "--folds", "x"],
    ["evaluate", "--strategy", "nope"],
    ["train"],
    ["compare", "--sets", "unknown-set", *FAST],
    ["evaluate", "--features", "not_a_variable", *FAST],
])
def test_invalid_input_exits_1(argv, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main([*argv, "--out", str(tmp_path)]))
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_key_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text('{"nope": 1}')
    assert main(["evaluate", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "c.json:1" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "afrisk", "synth", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "831 records" in proc.stdout


def test_predict_twice_identical(pipeline, tmp_path):
    imp = pipeline["impute"] / "cohort_imputed.csv"
    model = pipeline["train"] / "model.json"
    assert main(["predict", "--cohort", str(imp), "--model", str(model), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "predictions.csv").read_bytes() == (pipeline["predict"] / "predictions.csv").read_bytes()


def test_outputs_reload_with_toolkit(pipeline):
    from afrisk.cohort import load_cohort, load_schema
    from afrisk.selection import read_feature_report
    schema = load_schema(pipeline["synth"] / "schema.json")
    bal = load_cohort(pipeline["balance"] / "balanced.csv", schema)
    assert bal.class_counts() == (382, 382)
    imp = load_cohort(pipeline["impute"] / "cohort_imputed.csv", schema)
    assert not imp.has_missing
    rep = read_feature_report(pipeline["select"] / "feature_report.csv", schema)
    assert len(rep.selected_names) > 0


def test_evaluate_default_has_50_runs(tmp_path):
    assert main(["evaluate", "--strategy", "combined", "--classifier", "ensemble", "--out", str(tmp_path)]) == 0
    assert len(_read_csv(tmp_path / "runs.csv")) == 50
    rows = _read_csv(tmp_path / "roc.csv")
    assert rows[0]["fpr"] == "0.0" and float(rows[-1]["tpr"]) == 1.0
