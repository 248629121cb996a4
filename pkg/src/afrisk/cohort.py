"""Tabular data model for mixed-type clinical cohorts.

A :class:`Cohort` stores its cells as a dense ``float64`` matrix aligned to a
:class:`Schema`; ``NaN`` marks a missing cell and nominal cells hold the
category index as a float. Labels are ``1`` for AF and ``0`` for No-AF.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CategoryUnknownError,
    LabelParseError,
    MissingColumnError,
    SchemaError,
    TooFewSamplesError,
    UnknownVariableError,
    ValidationError,
    ZeroVarianceError,
)

AF = 1
NO_AF = 0
LABEL_NAMES = {AF: "AF", NO_AF: "NoAF"}

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "?", "."})

DEFAULT_LABEL_ALIASES = {
    "AF": ("af", "1", "true", "yes", "y"),
    "NoAF": ("noaf", "no-af", "no_af", "0", "false", "no", "n"),
}


class Kind(str, enum.Enum):
    CONTINUOUS = "continuous"
    NOMINAL = "nominal"


class Sign(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNSPECIFIED = "unspecified"

    @property
    def mark(self) -> str:
        return {"positive": "+", "negative": "-", "unspecified": ""}[self.value]


class Provenance(str, enum.Enum):
    INGESTED = "ingested"
    SYNTHETIC = "synthetic"
    RESAMPLED = "resampled"


@dataclass(frozen=True)
class VariableDescriptor:
    name: str
    kind: Kind
    categories: tuple[str, ...] = ()
    unit: str = ""
    expected_sign: Sign = Sign.UNSPECIFIED
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "expected_sign", Sign(self.expected_sign))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if not self.name:
            raise SchemaError("variable name must be non-empty")
        if self.kind is Kind.NOMINAL:
            if len(self.categories) < 2:
                raise SchemaError(f"nominal variable {self.name!r} needs >= 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"nominal variable {self.name!r} has duplicate categories")
        elif self.categories:
            raise SchemaError(f"continuous variable {self.name!r} must not list categories")

    @property
    def is_nominal(self) -> bool:
        return self.kind is Kind.NOMINAL

    def category_index(self, token: str) -> int | None:
        """Index of ``token`` among the categories, or None if unknown."""
        try:
            return self.categories.index(token)
        except ValueError:
            pass
        lowered = token.casefold()
        for i, c in enumerate(self.categories):
            if c.casefold() == lowered:
                return i
        return None

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind.value}
        if self.categories:
            d["categories"] = list(self.categories)
        if self.unit:
            d["unit"] = self.unit
        if self.expected_sign is not Sign.UNSPECIFIED:
            d["expected_sign"] = self.expected_sign.value
        if self.description:
            d["description"] = self.description
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VariableDescriptor":
        unknown = set(d) - {"name", "kind", "categories", "unit", "expected_sign", "description"}
        if unknown:
            raise SchemaError(f"variable {d.get('name')!r}: unknown fields {sorted(unknown)}")
        try:
            return cls(
                name=d["name"],
                kind=Kind(d["kind"]),
                categories=tuple(d.get("categories", ())),
                unit=d.get("unit", ""),
                expected_sign=Sign(d.get("expected_sign", "unspecified")),
                description=d.get("description", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"variable entry missing field {exc}") from None
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"variable {d.get('name')!r}: {exc}") from None


@dataclass(frozen=True)
class Schema:
    variables: tuple[VariableDescriptor, ...]
    label_name: str = "af"
    excluded_names: tuple[str, ...] = ()
    label_aliases: dict = field(default_factory=lambda: dict(DEFAULT_LABEL_ALIASES))

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "excluded_names", tuple(self.excluded_names))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate variable names: {dupes}")
        if self.label_name in names:
            raise SchemaError(f"label column {self.label_name!r} is also listed as a variable")
        clash = set(self.excluded_names) & set(names)
        if clash:
            raise SchemaError(f"excluded columns also listed as variables: {sorted(clash)}")
        aliases = {}
        for key in ("AF", "NoAF"):
            aliases[key] = tuple(str(a).casefold() for a in self.label_aliases.get(key, ()))
            if not aliases[key]:
                raise SchemaError(f"label_aliases must list at least one alias for {key}")
        if set(aliases["AF"]) & set(aliases["NoAF"]):
            raise SchemaError("label aliases for AF and NoAF overlap")
        object.__setattr__(self, "label_aliases", aliases)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self):
        return len(self.variables)

    def __iter__(self):
        return iter(self.variables)

    def __getitem__(self, name: str) -> VariableDescriptor:
        return self.variables[self.index(name)]

    def __contains__(self, name) -> bool:
        return name in self._index

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariableError(f"unknown variable {name!r}") from None

    def nominal_mask(self) -> np.ndarray:
        return np.array([v.is_nominal for v in self.variables], dtype=bool)

    def parse_label(self, token: str) -> int:
        t = token.strip().casefold()
        if t in self.label_aliases["AF"]:
            return AF
        if t in self.label_aliases["NoAF"]:
            return NO_AF
        raise LabelParseError(f"cannot map label value {token!r} to AF/NoAF")

    def subset(self, names: Iterable[str]) -> "Schema":
        return Schema(
            tuple(self[n] for n in names), self.label_name, self.excluded_names,
            {k: list(v) for k, v in self.label_aliases.items()},
        )

    def extend(self, extra: Iterable[VariableDescriptor]) -> "Schema":
        return Schema(
            self.variables + tuple(extra), self.label_name, self.excluded_names,
            {k: list(v) for k, v in self.label_aliases.items()},
        )

    def to_dict(self) -> dict:
        return {
            "label": {
                "name": self.label_name,
                "aliases": {k: list(v) for k, v in self.label_aliases.items()},
            },
            "excluded": list(self.excluded_names),
            "variables": [v.to_dict() for v in self.variables],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        if not isinstance(d, dict) or "variables" not in d:
            raise SchemaError("schema document must be an object with a 'variables' list")
        label = d.get("label", {})
        return cls(
            variables=tuple(VariableDescriptor.from_dict(v) for v in d["variables"]),
            label_name=label.get("name", "af"),
            excluded_names=tuple(d.get("excluded", ())),
            label_aliases=label.get("aliases", dict(DEFAULT_LABEL_ALIASES)),
        )


def load_schema(path) -> Schema:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return Schema.from_dict(doc)


def save_schema(schema: Schema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def default_schema() -> Schema:
    """The bundled schema: the 18 AF predictors, routine HCM descriptors and
    the general-population risk-model inputs used for feature-set comparison."""
    from importlib import resources

    text = resources.files("afrisk.data").joinpath("default_schema.json").read_text("utf-8")
    return Schema.from_dict(json.loads(text))


@dataclass(frozen=True)
class PatientRecord:
    """One row: cells aligned to schema order (None = missing) plus the label."""

    values: tuple
    label: int


@dataclass(frozen=True, eq=False)
class Cohort:
    schema: Schema
    values: np.ndarray
    labels: np.ndarray
    provenance: Provenance = Provenance.INGESTED

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(self.schema))
        labels = np.array(self.labels, dtype=np.int8, copy=True).reshape(-1)
        if values.ndim != 2 or values.shape[1] != len(self.schema):
            raise ValidationError(
                f"values shape {values.shape} does not match schema width {len(self.schema)}")
        if values.shape[0] != labels.shape[0]:
            raise ValidationError("values and labels disagree on record count")
        if not np.isin(labels, (NO_AF, AF)).all():
            raise ValidationError("labels must be 0 (NoAF) or 1 (AF)")
        provenance = Provenance(self.provenance)
        for j, var in enumerate(self.schema.variables):
            col = values[:, j]
            present = col[~np.isnan(col)]
            if np.isinf(present).any():
                raise ValidationError(f"variable {var.name!r} has infinite values")
            if var.is_nominal and present.size:
                bad = (present != np.round(present)) | (present < 0) | (present >= len(var.categories))
                if bad.any():
                    raise CategoryUnknownError(
                        f"variable {var.name!r} has category indices outside its category list")
        if provenance is not Provenance.RESAMPLED and labels.size and np.unique(labels).size < 2:
            raise ValidationError("a non-resampled cohort must contain both classes")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", provenance)

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_records(self) -> int:
        return self.values.shape[0]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def class_counts(self) -> tuple[int, int]:
        """``(n_noaf, n_af)``."""
        n_af = int(np.count_nonzero(self.labels == AF))
        return len(self.labels) - n_af, n_af

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]

    @property
    def records(self) -> list[PatientRecord]:
        out = []
        for row, lab in zip(self.values, self.labels):
            out.append(PatientRecord(
                tuple(None if math.isnan(v) else float(v) for v in row), int(lab)))
        return out

    @classmethod
    def from_records(cls, schema: Schema, records: Sequence[PatientRecord],
                     provenance=Provenance.INGESTED) -> "Cohort":
        values = np.full((len(records), len(schema)), np.nan)
        for i, rec in enumerate(records):
            if len(rec.values) != len(schema):
                raise ValidationError(f"record {i} has {len(rec.values)} cells, expected {len(schema)}")
            values[i] = [np.nan if v is None else v for v in rec.values]
        return cls(schema, values, [r.label for r in records], provenance)

    def take(self, indices, provenance=None) -> "Cohort":
        """Sub-cohort of the given record indices (order kept as given)."""
        idx = np.asarray(indices, dtype=np.intp)
        prov = self.provenance if provenance is None else provenance
        return Cohort(self.schema, self.values[idx], self.labels[idx], prov)

    def select_variables(self, names: Sequence[str]) -> "Cohort":
        cols = [self.schema.index(n) for n in names]
        return Cohort(self.schema.subset(names), self.values[:, cols], self.labels, self.provenance)

    def replace(self, values=None, labels=None, provenance=None, schema=None) -> "Cohort":
        return Cohort(
            self.schema if schema is None else schema,
            self.values if values is None else values,
            self.labels if labels is None else labels,
            self.provenance if provenance is None else provenance,
        )


def _format_cell(var: VariableDescriptor, v: float) -> str:
    if math.isnan(v):
        return ""
    if var.is_nominal:
        return var.categories[int(v)]
    return repr(float(v))


def write_cohort(cohort: Cohort, path_or_buffer) -> None:
    """Write ``cohort`` as CSV: schema variables in order, then the label column."""
    schema = cohort.schema

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema.names + [schema.label_name])
        for row, lab in zip(cohort.values, cohort.labels):
            w.writerow([_format_cell(var, v) for var, v in zip(schema.variables, row)]
                       + [LABEL_NAMES[int(lab)]])

    if isinstance(path_or_buffer, io.TextIOBase):
        _write(path_or_buffer)
    else:
        with open(path_or_buffer, "w", newline="", encoding="utf-8") as fh:
            _write(fh)


def load_cohort(csv_path, schema: Schema, strict: bool = True,
                provenance=Provenance.INGESTED) -> Cohort:
    """Read a CSV into a :class:`Cohort`.

    Columns not named by the schema (identifiers, dates, outcome columns
    listed in ``schema.excluded_names``) are dropped. Empty or unparseable
    cells become missing. With ``strict`` an unknown nominal label raises
    :class:`CategoryUnknownError`; otherwise it is recorded as missing.
    """
    with open(csv_path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumnError(f"{csv_path}: no header row") from None
        pos = {name: i for i, name in enumerate(header)}
        needed = schema.names + [schema.label_name]
        absent = [n for n in needed if n not in pos]
        if absent:
            raise MissingColumnError(f"{csv_path}: missing columns {absent}")
        cols = [pos[n] for n in schema.names]
        label_col = pos[schema.label_name]

        rows, labels = [], []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) < len(header):
                raw = raw + [""] * (len(header) - len(raw))
            try:
                labels.append(schema.parse_label(raw[label_col]))
            except LabelParseError as exc:
                raise LabelParseError(f"{csv_path}:{lineno}: {exc}") from None
            row = []
            for var, c in zip(schema.variables, cols):
                token = raw[c].strip()
                if token.casefold() in MISSING_TOKENS:
                    row.append(np.nan)
                elif var.is_nominal:
                    k = var.category_index(token)
                    if k is None:
                        if strict:
                            raise CategoryUnknownError(
                                f"{csv_path}:{lineno}: {token!r} is not a category of {var.name!r}")
                        row.append(np.nan)
                    else:
                        row.append(float(k))
                else:
                    try:
                        x = float(token)
                    except ValueError:
                        x = np.nan
                    row.append(x if math.isfinite(x) else np.nan)
            rows.append(row)

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(schema))
    return Cohort(schema, values, np.array(labels, dtype=np.int8), provenance)


# --------------------------------------------------------------------------
# Group comparison (descriptive statistics by class)


@dataclass(frozen=True)
class GroupRow:
    name: str
    kind: Kind
    test: str  # "WelchT" or "FisherExact"
    p_value: float | None
    noaf: dict
    af: dict
    flag: str = ""

    def display(self) -> tuple[str, str, str]:
        """Formatted No-AF cell, AF cell and p-value, as in a group-comparison table."""
        def cont(s):
            if s["n"] == 0:
                return "-"
            return f"{s['mean']:.3g} ± {s['sd']:.3g}" if not math.isnan(s["sd"]) else f"{s['mean']:.3g}"

        def nom(s):
            return "; ".join(f"{c}: {n} ({100 * p:.0f})" for c, n, p in
                             zip(s["categories"], s["counts"], s["proportions"]))

        fmt = cont if self.kind is Kind.CONTINUOUS else nom
        if self.p_value is None:
            p = "undefined"
        elif self.p_value < 0.001:
            p = "<0.001"
        else:
            p = f"{self.p_value:.3g}"
        return fmt(self.noaf), fmt(self.af), p


@dataclass(frozen=True)
class GroupComparison:
    rows: tuple[GroupRow, ...]
    n_noaf: int
    n_af: int

    def __getitem__(self, name: str) -> GroupRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise UnknownVariableError(f"no row for {name!r}")

    def format_table(self) -> str:
        lines = [f"{'variable':<34} {'No-AF n=' + str(self.n_noaf):<28} "
                 f"{'AF n=' + str(self.n_af):<28} p"]
        for r in self.rows:
            a, b, p = r.display()
            lines.append(f"{r.name:<34} {a:<28} {b:<28} {p}" + (f"  [{r.flag}]" if r.flag else ""))
        return "\n".join(lines)


def _continuous_summary(x: np.ndarray) -> dict:
    n = x.size
    return {
        "n": int(n),
        "mean": float(np.mean(x)) if n else math.nan,
        "sd": float(np.std(x, ddof=1)) if n > 1 else math.nan,
    }


def _nominal_summary(x: np.ndarray, var: VariableDescriptor) -> dict:
    counts = np.bincount(x.astype(np.intp), minlength=len(var.categories))
    total = counts.sum()
    props = counts / total if total else np.full(counts.shape, math.nan)
    return {
        "n": int(total),
        "categories": list(var.categories),
        "counts": [int(c) for c in counts],
        "proportions": [float(p) for p in props],
    }


def summarize_groups(cohort: Cohort) -> GroupComparison:
    """Per-variable AF vs No-AF comparison (Welch t / Fisher exact).

    Missing cells are dropped variable by variable. A continuous variable
    whose classes cannot be tested (fewer than two values in a class, or
    both classes constant) is reported with ``p_value=None`` and
    ``flag="DegenerateGroup"``.
    """
    from .stats import fisher_exact_test, fisher_exact_rx2, welch_t_test

    n_noaf, n_af = cohort.class_counts()
    if n_noaf == 0 or n_af == 0:
        raise ValidationError("summarize_groups needs at least one record in each class")
    is_af = cohort.labels == AF
    rows = []
    for j, var in enumerate(cohort.schema.variables):
        col = cohort.values[:, j]
        present = ~np.isnan(col)
        a, b = col[present & ~is_af], col[present & is_af]
        if var.kind is Kind.CONTINUOUS:
            p, flag = None, ""
            try:
                res = welch_t_test(a, b)
                p = res.p_value
                flag = res.flag
            except (TooFewSamplesError, ZeroVarianceError):
                flag = "DegenerateGroup"
            rows.append(GroupRow(var.name, var.kind, "WelchT", p,
                                 _continuous_summary(a), _continuous_summary(b), flag))
        else:
            sa, sb = _nominal_summary(a, var), _nominal_summary(b, var)
            table = np.array([sa["counts"], sb["counts"]]).T  # categories x class
            if len(var.categories) == 2:
                res = fisher_exact_test(table)
            else:
                res = fisher_exact_rx2(table)
            rows.append(GroupRow(var.name, var.kind, "FisherExact", res.p_value, sa, sb, res.flag))
    return GroupComparison(tuple(rows), n_noaf, n_af)


def write_group_comparison(comparison: GroupComparison, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "kind", "test", "noaf", "af", "p_value", "flag"])
        for r in comparison.rows:
            a, b, _ = r.display()
            w.writerow([r.name, r.kind.value, r.test, a, b,
                        "" if r.p_value is None else repr(r.p_value), r.flag])
