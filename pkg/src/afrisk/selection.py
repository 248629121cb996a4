"""Univariate feature selection and association analysis.

Continuous variables are screened with the Welch t-test, nominal variables
with information gain against a label-permutation null. Every variable also
gets a polychoric correlation with the label, which supplies the direction
(sign) of its association.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .cohort import AF, Cohort, Kind, Schema
from .errors import SingleClassError, UnknownVariableError, ValidationError
from .stats import _information_gain_table, crosstab, polychoric_table, welch_t_test


@dataclass(frozen=True)
class SelectionConfig:
    continuous_p_max: float = 0.06
    nominal_rule: str = "permutation"  # "permutation" | "threshold" | "top_k"
    ig_min: float = 0.0
    top_k: int | None = None
    n_permutations: int = 200
    null_quantile: float = 0.95
    n_bins: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.continuous_p_max < 1.0:
            raise ValidationError("continuous_p_max must lie in (0, 1)")
        if self.n_bins < 2:
            raise ValidationError("n_bins must be >= 2")
        if self.nominal_rule not in ("permutation", "threshold", "top_k"):
            raise ValidationError(f"unknown nominal_rule {self.nominal_rule!r}")
        if self.nominal_rule == "top_k" and (self.top_k is None or self.top_k < 0):
            raise ValidationError("nominal_rule='top_k' needs a nonnegative top_k")
        if self.nominal_rule == "permutation":
            if self.n_permutations < 1 or not 0.0 < self.null_quantile < 1.0:
                raise ValidationError("permutation rule needs n_permutations >= 1 and 0 < null_quantile < 1")


@dataclass(frozen=True)
class FeatureRow:
    name: str
    kind: Kind
    p_value: float | None
    information_gain: float | None
    ig_cutoff: float | None
    polychoric_rho: float
    selected: bool

    @property
    def sign(self) -> str:
        return "positive" if self.polychoric_rho > 0 else "negative"


@dataclass(frozen=True)
class FeatureReport:
    rows: tuple[FeatureRow, ...]
    variable_order: tuple[str, ...]

    def __getitem__(self, name: str) -> FeatureRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise UnknownVariableError(f"no report row for {name!r}")

    def __len__(self):
        return len(self.rows)

    @property
    def selected_names(self) -> list[str]:
        """Selected variables, in schema order."""
        chosen = {r.name for r in self.rows if r.selected}
        return [n for n in self.variable_order if n in chosen]

    def format_table(self, schema: Schema | None = None) -> str:
        head = f"{'variable':<34} {'type':<11} {'P / IG':>12} {'polychoric':>11}  sel"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            mark = f" ({'+' if r.sign == 'positive' else '-'})"
            crit = f"{r.p_value:.2g}" if r.kind is Kind.CONTINUOUS else f"IG {r.information_gain:.4f}"
            lines.append(f"{r.name + mark:<34} {r.kind.value:<11} {crit:>12} "
                         f"{r.polychoric_rho:>11.3f}  {'*' if r.selected else ''}")
        return "\n".join(lines)


def quantile_bins(x, n_bins: int) -> np.ndarray:
    """Rank-based bin index in ``0..n_bins-1``; tied values share a bin."""
    x = np.asarray(x, dtype=np.float64)
    ranks = rankdata(x, method="min") - 1
    return np.floor(ranks * n_bins / x.size).astype(np.intp)


def _joint_counts(xi: np.ndarray, yi: np.ndarray, nx: int) -> np.ndarray:
    return np.bincount(xi * 2 + yi, minlength=nx * 2).reshape(nx, 2).astype(np.float64)


def permutation_ig_cutoff(x, y, n_permutations: int, quantile: float, seed) -> float:
    """Upper ``quantile`` of information gain under randomly permuted labels.

    The null depends only on the category counts and the class counts, so the
    permutations are drawn over canonically ordered copies of ``x`` and ``y``;
    shuffling the input records cannot change the cutoff.
    """
    _, xi = np.unique(np.sort(np.asarray(x)), return_inverse=True)
    ys = np.sort(np.asarray(y).astype(np.intp))
    nx = int(xi.max()) + 1
    rng = np.random.default_rng(seed)
    null = np.empty(n_permutations)
    for b in range(n_permutations):
        null[b] = _information_gain_table(_joint_counts(xi, rng.permutation(ys), nx))
    return float(np.quantile(null, quantile))


def _variable_seed(seed: int, name: str) -> list[int]:
    return [seed, zlib.crc32(name.encode("utf-8"))]


def select_features(cohort: Cohort, config: SelectionConfig = SelectionConfig()) -> FeatureReport:
    """Screen each variable against the AF label, one at a time.

    The cohort must be complete (impute first) and contain both classes.
    Rows come back sorted by ascending p-value (continuous) followed by
    descending information gain (nominal).
    """
    if cohort.has_missing:
        raise ValidationError("select_features needs a complete cohort; impute missing cells first")
    y = cohort.labels.astype(np.intp)
    n_noaf, n_af = cohort.class_counts()
    if n_noaf == 0 or n_af == 0:
        raise SingleClassError("select_features needs both classes")
    is_af = y == AF

    cont_rows, nom_rows = [], []
    for j, var in enumerate(cohort.schema.variables):
        x = cohort.values[:, j]
        if var.kind is Kind.CONTINUOUS:
            res = welch_t_test(x[is_af], x[~is_af])
            rho = polychoric_table(crosstab(quantile_bins(x, config.n_bins), y))
            cont_rows.append(FeatureRow(var.name, var.kind, res.p_value, None, None, rho,
                                        res.p_value <= config.continuous_p_max))
        else:
            xi = x.astype(np.intp)
            ig = _information_gain_table(_joint_counts(xi, y, len(var.categories)))
            cutoff = None
            if config.nominal_rule == "permutation":
                cutoff = permutation_ig_cutoff(xi, y, config.n_permutations, config.null_quantile,
                                               _variable_seed(config.seed, var.name))
                selected = ig > cutoff
            elif config.nominal_rule == "threshold":
                cutoff = config.ig_min
                selected = ig > cutoff
            else:
                selected = False  # ranked below
            rho = polychoric_table(crosstab(xi, y))
            nom_rows.append(FeatureRow(var.name, var.kind, None, ig, cutoff, rho, selected))

    cont_rows.sort(key=lambda r: r.p_value)
    nom_rows.sort(key=lambda r: -r.information_gain)
    if config.nominal_rule == "top_k":
        nom_rows = [FeatureRow(r.name, r.kind, r.p_value, r.information_gain, r.ig_cutoff,
                               r.polychoric_rho, i < config.top_k and r.information_gain > 0)
                    for i, r in enumerate(nom_rows)]
    return FeatureReport(tuple(cont_rows + nom_rows), tuple(cohort.schema.names))


def feature_names(features) -> list[str]:
    """Selected variable names from a report, or a deduplicated name list."""
    if isinstance(features, FeatureReport):
        return features.selected_names
    seen, out = set(), []
    for name in features:
        if name not in seen:
            seen.add(name)
            out.append(name)
    return out


_REPORT_FIELDS = ["variable", "kind", "p_value", "information_gain", "ig_cutoff",
                  "polychoric_rho", "sign", "selected"]


def _num(v):
    return "" if v is None else repr(float(v))


def write_feature_report(report: FeatureReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_REPORT_FIELDS)
        for r in report.rows:
            w.writerow([r.name, r.kind.value, _num(r.p_value), _num(r.information_gain),
                        _num(r.ig_cutoff), repr(r.polychoric_rho), r.sign, int(r.selected)])


def read_feature_report(path, schema: Schema | None = None) -> FeatureReport:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            opt = lambda s: None if s == "" else float(s)  # noqa: E731
            rows.append(FeatureRow(
                rec["variable"], Kind(rec["kind"]), opt(rec["p_value"]), opt(rec["information_gain"]),
                opt(rec["ig_cutoff"]), float(rec["polychoric_rho"]), rec["selected"] in ("1", "true", "True")))
    if schema is not None:
        order = tuple(schema.names)
        for r in rows:
            schema.index(r.name)
    else:
        order = tuple(r.name for r in rows)
    return FeatureReport(tuple(rows), order)


def check_names(schema: Schema, names: Sequence[str]) -> None:
    for n in names:
        schema.index(n)

