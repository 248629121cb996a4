"""Command-line entry point: ``afrisk <subcommand> [options]``.

Options come from ``--config`` (a JSON file) and flags; flags win. Every
subcommand writes its artifacts plus ``config.json`` (the effective
configuration) into the output directory, atomically. Exit status is 0 on
success, 1 for invalid input and 2 for any other failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from .classify import CLASSIFIERS, load_model, model_to_dict, train_classifier
from .cohort import LABEL_NAMES, Cohort, default_schema, load_cohort, load_schema, write_cohort
from .errors import AfRiskError, ValidationError
from .evaluate import (
    STRATEGIES,
    FoldPlan,
    balance_for_strategy,
    compare_feature_sets,
    format_comparison,
    run_experiment,
    write_comparison_csv,
)
from .featuresets import FULL18, NAMED_SETS, named_feature_set
from .impute import ImputeConfig, impute_cohort
from .resample import ResampleConfig, balance_training_set
from .selection import SelectionConfig, read_feature_report, select_features, write_feature_report
from .synthgen import (
    age_prevalence_table,
    default_generator_spec,
    generate_cohort,
    load_generator_spec,
)

log = logging.getLogger("afrisk")

OUT_ENV = "AFRISK_OUT"

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

# keys a --config file may carry; section keys map onto the module configs
_SCALAR_KEYS = {
    "seed": int, "cohort": str, "schema": str, "out": str, "strategy": str,
    "classifier": str, "folds": int, "repeats": int, "threshold": float,
    "sets": (str, list), "features": (str, list), "model": str, "generator": str,
    "reselect": bool,
}
_SECTION_KEYS = {
    "impute": ImputeConfig,
    "selection": SelectionConfig,
    "resample": ResampleConfig,
    "classifier_params": dict,
    "feature_sets": dict,
}


class ConfigError(ValidationError):
    pass


# ---------------------------------------------------------------------------
# config handling

def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def load_config(path) -> dict:
    """Parse and validate a JSON config file; messages carry ``path:line``."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    for key, value in doc.items():
        where = f"{path}:{_line_of(text, key)}"
        if key in _SCALAR_KEYS:
            want = _SCALAR_KEYS[key]
            ok = isinstance(value, want) and not (want is int and isinstance(value, bool))
            if want is float:
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            if not ok:
                raise ConfigError(f"{where}: {key!r} has the wrong type ({type(value).__name__})")
        elif key in _SECTION_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: {key!r} must be an object")
            target = _SECTION_KEYS[key]
            if target is not dict:
                try:
                    target(**value)
                except TypeError as exc:
                    raise ConfigError(f"{where}: {key}: {exc}") from None
                except ValidationError as exc:
                    raise ConfigError(f"{where}: {key}: {exc}") from None
        else:
            raise ConfigError(f"{where}: unknown config key {key!r}")
    return doc


def effective_config(args: argparse.Namespace, file_cfg: dict) -> dict:
    """Merge defaults, config file and explicit flags (in rising priority)."""
    cfg = {
        "seed": 0, "strategy": "combined", "classifier": "ensemble", "folds": 5,
        "repeats": 10, "threshold": 0.5, "reselect": False,
        "impute": {}, "selection": {}, "resample": {}, "classifier_params": {},
        "feature_sets": {},
    }
    cfg.update(file_cfg)
    for key in _SCALAR_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            cfg[key] = v
    if cfg.get("out") is None:
        cfg["out"] = os.environ.get(OUT_ENV, "afrisk-out")
    return cfg


# ---------------------------------------------------------------------------
# output helpers

def _atomic(path: Path, write) -> None:
    """Run ``write(tmp_path)`` then move the result onto ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _write_json(path: Path, obj) -> None:
    def w(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _atomic(path, w)


def _write_rows(path: Path, header, rows) -> None:
    def w(tmp):
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            out.writerows(rows)
    _atomic(path, w)


# ---------------------------------------------------------------------------
# shared inputs

def _schema(cfg):
    return load_schema(cfg["schema"]) if cfg.get("schema") else default_schema()


def _require_file(path, what):
    if not path:
        raise ValidationError(f"--{what} is required")
    if not Path(path).is_file():
        raise ValidationError(f"{what} file not found: {path}")


def _cohort(cfg, required=True) -> Cohort | None:
    if not cfg.get("cohort"):
        if required:
            raise ValidationError("--cohort is required")
        return None
    _require_file(cfg["cohort"], "cohort")
    return load_cohort(cfg["cohort"], _schema(cfg))


def _complete(cohort: Cohort, cfg) -> Cohort:
    if cohort.has_missing:
        log.info("cohort has missing cells; imputing with %s", cfg["impute"] or "defaults")
        return impute_cohort(cohort, ImputeConfig(**cfg["impute"]))
    return cohort


def _features(cfg, cohort: Cohort) -> list[str]:
    """Resolve ``features``: a feature-report CSV, a named set, or a name list."""
    spec = cfg.get("features")
    if spec is None:
        return list(FULL18)
    if isinstance(spec, list):
        names = spec
    elif Path(spec).is_file():
        names = read_feature_report(spec, cohort.schema).selected_names
    elif spec.strip().lower() in NAMED_SETS:
        names = list(named_feature_set(spec))
    else:
        names = [s.strip() for s in spec.split(",") if s.strip()]
    for n in names:
        cohort.schema.index(n)
    return names


def _synthetic_default(cfg) -> Cohort:
    if cfg.get("generator"):
        _require_file(cfg["generator"], "generator")
        spec = load_generator_spec(cfg["generator"]).replace(seed=cfg["seed"])
    else:
        spec = default_generator_spec(seed=cfg["seed"])
    log.info("no --cohort given; generating a synthetic cohort (seed %d)", cfg["seed"])
    return generate_cohort(spec)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(cfg, out: Path) -> None:
    if cfg.get("generator"):
        _require_file(cfg["generator"], "generator")
        spec = load_generator_spec(cfg["generator"])
        if cfg.get("_seed_flag"):
            spec = spec.replace(seed=cfg["seed"])
    else:
        spec = default_generator_spec(seed=cfg["seed"])
    cohort = generate_cohort(spec)
    _atomic(out / "cohort.csv", lambda p: write_cohort(cohort, p))
    _write_json(out / "schema.json", cohort.schema.to_dict())
    _write_json(out / "generator.json", spec.to_dict())
    if "age" in cohort.schema:
        rows = age_prevalence_table(cohort)
        _write_rows(out / "age_prevalence.csv", ["age_bin", "n", "n_af", "prevalence", "flag"],
                    [[r.label, r.n, r.n_af, "" if r.flag else repr(r.prevalence), r.flag] for r in rows])
    n_noaf, n_af = cohort.class_counts()
    print(f"synthetic cohort: {len(cohort)} records ({n_noaf} NoAF, {n_af} AF) -> {out}")


def cmd_impute(cfg, out: Path) -> None:
    cohort = _cohort(cfg)
    done = impute_cohort(cohort, ImputeConfig(**cfg["impute"]))
    _atomic(out / "cohort_imputed.csv", lambda p: write_cohort(done, p))
    print(f"imputed {int(cohort.missing_mask.sum())} cells -> {out / 'cohort_imputed.csv'}")


def cmd_select(cfg, out: Path) -> None:
    cohort = _complete(_cohort(cfg), cfg)
    sel = dict(cfg["selection"])
    sel.setdefault("seed", cfg["seed"])
    report = select_features(cohort, SelectionConfig(**sel))
    _atomic(out / "feature_report.csv", lambda p: write_feature_report(report, p))
    print(report.format_table(cohort.schema))


def cmd_balance(cfg, out: Path) -> None:
    cohort = _complete(_cohort(cfg), cfg)
    res = dict(cfg["resample"])
    res.setdefault("seed", cfg["seed"])
    rcfg = ResampleConfig(**res)
    balanced = balance_training_set(cohort, rcfg)
    before, after = cohort.class_counts(), balanced.class_counts()
    summary = {
        "input": {"NoAF": before[0], "AF": before[1]},
        "output": {"NoAF": after[0], "AF": after[1]},
        "synthetic_af": after[1] - before[1] if after[1] > before[1] else 0,
        "resample": rcfg.__dict__,
    }
    _atomic(out / "balanced.csv", lambda p: write_cohort(balanced, p))
    _write_json(out / "balance_summary.json", summary)
    print(f"balanced {before[0]}/{before[1]} -> {after[0]}/{after[1]} (NoAF/AF)")


def cmd_train(cfg, out: Path) -> None:
    cohort = _complete(_cohort(cfg), cfg)
    names = _features(cfg, cohort)
    res = dict(cfg["resample"])
    res.setdefault("seed", cfg["seed"])
    train = balance_for_strategy(cohort, cfg["strategy"], ResampleConfig(**res))
    model = train_classifier(cfg["classifier"], train, names, seed=cfg["seed"],
                             **cfg["classifier_params"])
    _write_json(out / "model.json", model_to_dict(model))
    print(f"trained {cfg['classifier']} on {len(train)} records, {len(names)} variables "
          f"-> {out / 'model.json'}")


def cmd_predict(cfg, out: Path) -> None:
    _require_file(cfg.get("model"), "model")
    model = load_model(cfg["model"])
    cohort = _complete(_cohort(cfg), cfg)
    p = np.atleast_1d(model.predict_proba(cohort))
    pred = (p >= cfg["threshold"]).astype(int)
    rows = [[i, LABEL_NAMES[int(lab)], repr(float(pi)), LABEL_NAMES[int(d)]]
            for i, (lab, pi, d) in enumerate(zip(cohort.labels, p, pred))]
    _write_rows(out / "predictions.csv", ["record", "label", "p_af", "predicted"], rows)
    print(f"scored {len(rows)} records -> {out / 'predictions.csv'}")


def _plan(cfg) -> FoldPlan:
    return FoldPlan(cfg["folds"], cfg["repeats"], True, cfg["seed"])


def cmd_evaluate(cfg, out: Path) -> None:
    cohort = _cohort(cfg, required=False)
    cohort = _complete(_synthetic_default(cfg) if cohort is None else cohort, cfg)
    names = _features(cfg, cohort)
    reselect = None
    if cfg["reselect"]:
        sel = dict(cfg["selection"])
        sel.setdefault("seed", cfg["seed"])
        reselect = SelectionConfig(**sel)
    report = run_experiment(cohort, names, cfg["strategy"], cfg["classifier"], _plan(cfg),
                            ResampleConfig(**cfg["resample"]), cfg["threshold"],
                            cfg["classifier_params"], reselect)
    _atomic(out / "runs.csv", report.write_runs_csv)
    _atomic(out / "summary.json", report.write_summary_json)
    _atomic(out / "roc.csv", report.write_roc_csv)
    print(report.format_summary())


def cmd_compare(cfg, out: Path) -> None:
    cohort = _cohort(cfg, required=False)
    cohort = _complete(_synthetic_default(cfg) if cohort is None else cohort, cfg)
    wanted = cfg.get("sets") or "fhs,aric,charge,full18,la-only"
    if isinstance(wanted, str):
        wanted = [s.strip() for s in wanted.split(",") if s.strip()]
    custom = cfg["feature_sets"]
    sets = {}
    for name in wanted:
        if name in custom:
            sets[name] = list(custom[name])
        else:
            try:
                sets[name] = list(named_feature_set(name))
            except KeyError as exc:
                raise ValidationError(str(exc.args[0])) from None
    rows = compare_feature_sets(cohort, sets, _plan(cfg), ResampleConfig(**cfg["resample"]),
                                cfg["strategy"], cfg["classifier"], cfg["threshold"],
                                cfg["classifier_params"])
    _atomic(out / "comparison.csv", lambda p: write_comparison_csv(rows, p))
    print(format_comparison(rows))


COMMANDS = {
    "synth": (cmd_synth, "draw a synthetic cohort"),
    "impute": (cmd_impute, "fill missing cells by nearest-neighbour imputation"),
    "select": (cmd_select, "screen variables and write a feature report"),
    "balance": (cmd_balance, "undersample NoAF and SMOTE-oversample AF"),
    "train": (cmd_train, "train a classifier and save it as JSON"),
    "predict": (cmd_predict, "score a cohort with a saved model"),
    "evaluate": (cmd_evaluate, "repeated stratified cross-validation"),
    "compare": (cmd_compare, "cross-validate several variable sets"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override it)")
    common.add_argument("--seed", type=int, help="global seed (default 0)")
    common.add_argument("--cohort", help="cohort CSV")
    common.add_argument("--schema", help="schema JSON (default: bundled schema)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./afrisk-out)")
    common.add_argument("--strategy", choices=STRATEGIES)
    common.add_argument("--classifier", choices=CLASSIFIERS)
    common.add_argument("--folds", type=int)
    common.add_argument("--repeats", type=int)
    common.add_argument("--threshold", type=float)
    common.add_argument("--sets", help="comma-separated feature-set names")
    common.add_argument("--features",
                        help="feature report CSV, a named set, or comma-separated variable names")
    common.add_argument("--model", help="model JSON (predict)")
    common.add_argument("--generator", help="generator spec JSON (synth/evaluate/compare)")
    common.add_argument("--reselect", action="store_true",
                        help="re-run feature selection inside every training fold")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="afrisk", description="AF risk modelling pipeline for HCM cohorts")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = effective_config(args, file_cfg)
        cfg["_seed_flag"] = args.seed is not None or "seed" in file_cfg
        out = Path(cfg["out"])
        shown = {k: v for k, v in cfg.items() if not k.startswith("_") and k != "out"}
        shown["command"] = args.command
        log.info("effective config: %s", json.dumps(shown, sort_keys=True))
        COMMANDS[args.command][0](cfg, out)
        _write_json(out / "config.json", shown)
    except AfRiskError as exc:
        code = EXIT_INVALID if isinstance(exc, ValidationError) else EXIT_RUNTIME
        print(f"afrisk {args.command}: error: {exc}", file=sys.stderr)
        return code
    except FileNotFoundError as exc:
        print(f"afrisk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"afrisk {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
