"""Repeated stratified k-fold evaluation with fold-local class balancing."""

from __future__ import annotations

import csv
import json
import math
import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np

from .classify import train_classifier
from .cohort import AF, Cohort
from .errors import ClassTooSmallError, ValidationError
from .metrics import compute_roc_auc, confusion_at_threshold
from .resample import ResampleConfig, balance_training_set, random_undersample
from .selection import SelectionConfig, feature_names, select_features

STRATEGIES = ("baseline", "undersample", "combined")


def derive_rng(base_seed: int, component: str, *keys: int) -> np.random.Generator:
    """Generator for one named consumer of randomness (e.g. ``"folds"``,
    ``"resample"``) at a given (repeat, fold)."""
    return np.random.default_rng([int(base_seed), zlib.crc32(component.encode()), *map(int, keys)])


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int = 5
    n_repeats: int = 10
    stratified: bool = True
    base_seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValidationError("n_folds must be >= 2")
        if self.n_repeats < 1:
            raise ValidationError("n_repeats must be >= 1")

    @property
    def n_runs(self) -> int:
        return self.n_folds * self.n_repeats


def stratified_kfold(data, plan: FoldPlan, repeat_index: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split record indices into ``plan.n_folds`` (train, test) pairs.

    Each class is shuffled separately and dealt round-robin to the folds,
    continuing where the previous class stopped, so per-class and total fold
    sizes both differ by at most one. ``data`` is a Cohort or a label array.
    """
    labels = np.asarray(data.labels if isinstance(data, Cohort) else data).ravel()
    k = plan.n_folds
    rng = derive_rng(plan.base_seed, "folds", repeat_index)
    fold_of = np.empty(labels.size, dtype=np.intp)
    if plan.stratified:
        offset = 0
        for cls in (0, 1):
            idx = np.flatnonzero(labels == cls)
            if idx.size < k:
                raise ClassTooSmallError(
                    f"class {cls} has {idx.size} records, fewer than {k} folds")
            idx = rng.permutation(idx)
            fold_of[idx] = (offset + np.arange(idx.size)) % k
            offset = (offset + idx.size) % k
    else:
        if labels.size < k:
            raise ClassTooSmallError(f"{labels.size} records for {k} folds")
        idx = rng.permutation(labels.size)
        fold_of[idx] = np.arange(labels.size) % k
    everything = np.arange(labels.size)
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]


@dataclass(frozen=True)
class RunResult:
    repeat: int
    fold: int
    n_train_noaf: int
    n_train_af: int
    n_test_noaf: int
    n_test_af: int
    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float
    specificity: float
    auc: float


@dataclass
class EvalReport:
    strategy: str
    classifier: str
    features: list[str]
    threshold: float
    runs: list[RunResult]
    test_indices: list[np.ndarray] = field(repr=False)
    test_scores: list[np.ndarray] = field(repr=False)
    pooled_fpr: np.ndarray = field(repr=False, default=None)
    pooled_tpr: np.ndarray = field(repr=False, default=None)
    pooled_thresholds: np.ndarray = field(repr=False, default=None)
    pooled_auc: float = math.nan

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.runs], dtype=np.float64)

    def aggregate(self) -> dict:
        out = {}
        for name in ("sensitivity", "specificity", "auc"):
            v = self.metric(name)
            out[name] = {"mean": float(np.mean(v)),
                         "sd": float(np.std(v, ddof=1)) if v.size > 1 else 0.0}
        return out

    def summary_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "classifier": self.classifier,
            "threshold": self.threshold,
            "features": self.features,
            "n_runs": len(self.runs),
            "aggregate": self.aggregate(),
            "pooled_auc": self.pooled_auc,
        }

    def write_runs_csv(self, path) -> None:
        cols = list(RunResult.__dataclass_fields__)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.runs:
                w.writerow([_cell(getattr(r, c)) for c in cols])

    def write_summary_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_roc_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fpr", "tpr", "threshold"])
            for x, y, t in zip(self.pooled_fpr, self.pooled_tpr, self.pooled_thresholds):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(t))])

    def format_summary(self) -> str:
        agg = self.aggregate()
        lines = [f"strategy={self.strategy} classifier={self.classifier} runs={len(self.runs)} "
                 f"threshold={self.threshold}"]
        for name, label in (("sensitivity", "Sensitivity"), ("specificity", "Specificity"),
                            ("auc", "AUC (C-index)")):
            lines.append(f"  {label:<14} {agg[name]['mean']:.2f} (± {agg[name]['sd']:.2f})")
        lines.append(f"  pooled AUC     {self.pooled_auc:.3f}")
        return "\n".join(lines)


def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


def balance_for_strategy(train: Cohort, strategy: str, cfg: ResampleConfig, rng=None) -> Cohort:
    """Balance a training set as ``strategy`` prescribes (baseline leaves it alone)."""
    if strategy == "baseline":
        return train
    if strategy == "undersample":
        return random_undersample(
            train, ResampleConfig(1.0, 1.0, cfg.smote_k, cfg.seed), rng)
    if strategy == "combined":
        return balance_training_set(train, cfg, rng)
    raise ValidationError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def run_experiment(cohort: Cohort, features, strategy: str = "combined",
                   classifier: str = "ensemble", plan: FoldPlan = FoldPlan(),
                   resample_cfg: ResampleConfig = ResampleConfig(), threshold: float = 0.5,
                   classifier_params: dict | None = None,
                   reselect: SelectionConfig | None = None) -> EvalReport:
    """Cross-validate one (strategy, classifier) pair.

    Only the training part of each fold is balanced; the test fold is scored
    as drawn. Features are fixed up front unless ``reselect`` is given, in
    which case selection is re-run on every training fold (before balancing).
    All randomness derives from ``plan.base_seed``, so two calls with the same
    arguments give identical reports, and every strategy sees the same test
    folds.
    """
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if cohort.has_missing:
        raise ValidationError("run_experiment needs an imputed cohort")
    names = feature_names(features)
    for n in names:
        cohort.schema.index(n)
    params = dict(classifier_params or {})

    runs, test_idx, test_scores = [], [], []
    for r in range(plan.n_repeats):
        for f, (tr, te) in enumerate(stratified_kfold(cohort, plan, r)):
            train = cohort.take(tr)
            use = names
            if reselect is not None:
                use = select_features(train, reselect).selected_names
            balanced = balance_for_strategy(train, strategy, resample_cfg, derive_rng(plan.base_seed, "resample", r, f))
            model_seed = int(derive_rng(plan.base_seed, "model", r, f).integers(2**31))
            model = train_classifier(classifier, balanced, use, seed=model_seed, **params)
            test = cohort.take(te)
            scores = np.asarray(model.predict_proba(test), dtype=np.float64)
            cm = confusion_at_threshold(scores, test.labels, threshold)
            _, auc = compute_roc_auc(scores, test.labels)
            b_noaf, b_af = balanced.class_counts()
            t_noaf, t_af = test.class_counts()
            runs.append(RunResult(r, f, b_noaf, b_af, t_noaf, t_af, cm.tp, cm.fp, cm.tn, cm.fn,
                                  cm.sensitivity, cm.specificity, auc))
            test_idx.append(te)
            test_scores.append(scores)

    report = EvalReport(strategy, classifier, list(names), threshold, runs, test_idx, test_scores)
    pooled_labels = np.concatenate([cohort.labels[i] for i in test_idx])
    curve, pooled_auc = compute_roc_auc(np.concatenate(test_scores), pooled_labels)
    report.pooled_fpr, report.pooled_tpr = curve.fpr, curve.tpr
    report.pooled_thresholds, report.pooled_auc = curve.thresholds, pooled_auc
    return report


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    features: tuple[str, ...]
    report: EvalReport


def compare_feature_sets(cohort: Cohort, sets: dict, plan: FoldPlan = FoldPlan(),
                         resample_cfg: ResampleConfig = ResampleConfig(),
                         strategy: str = "combined", classifier: str = "ensemble",
                         threshold: float = 0.5, classifier_params: dict | None = None
                         ) -> list[ComparisonRow]:
    """Run the same experiment once per named variable set (same folds for all)."""
    rows = []
    for name, variables in sets.items():
        variables = list(variables)
        unique = feature_names(variables)
        if len(unique) != len(variables):
            warnings.warn(f"feature set {name!r} lists duplicate variables; deduplicated",
                          UserWarning, stacklevel=2)
        for v in unique:
            cohort.schema.index(v)
        rep = run_experiment(cohort, unique, strategy, classifier, plan, resample_cfg, threshold,
                             classifier_params)
        rows.append(ComparisonRow(name, tuple(unique), rep))
    return rows


def write_comparison_csv(rows: list[ComparisonRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_set", "n_features", "sensitivity_mean", "sensitivity_sd",
                    "specificity_mean", "specificity_sd", "auc_mean", "auc_sd", "features"])
        for row in rows:
            agg = row.report.aggregate()
            w.writerow([row.name, len(row.features)]
                       + [repr(agg[m][s]) for m in ("sensitivity", "specificity", "auc")
                          for s in ("mean", "sd")]
                       + [";".join(row.features)])


def format_comparison(rows: list[ComparisonRow]) -> str:
    lines = [f"{'feature set':<12} {'n':>3}  {'Sensitivity':>13}  {'Specificity':>13}  {'C-index/AUC':>13}"]
    for row in rows:
        agg = row.report.aggregate()
        cells = [f"{agg[m]['mean']:.2f} (± {agg[m]['sd']:.2f})" for m in ("sensitivity", "specificity", "auc")]
        lines.append(f"{row.name:<12} {len(row.features):>3}  " + "  ".join(f"{c:>13}" for c in cells))
    return "\n".join(lines)


def af_fraction(cohort: Cohort) -> float:
    return float(np.mean(cohort.labels == AF)) if len(cohort) else math.nan
