"""Synthetic HCM-like cohorts for exercising the pipeline without clinical data.

Continuous cells are normal per class, optionally coupled through a Gaussian
copula; nominal cells are independent categorical draws per class. Cells are
then blanked uniformly at ``missing_rate``.

The default parameters follow published per-class summaries of an HCM clinic
cohort (831 patients, 191 with AF). Variables for which no per-class summary
exists carry small invented effects or none at all; see
:func:`default_generator_spec`.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .cohort import AF, NO_AF, Cohort, Provenance, Schema, VariableDescriptor, default_schema
from .errors import InvalidSpecError, UnknownVariableError
from .featuresets import FULL18


@dataclass(frozen=True)
class ContinuousParams:
    noaf_mean: float
    noaf_sd: float
    af_mean: float
    af_sd: float
    floor: float | None = None

    def to_dict(self) -> dict:
        d = {"noaf": [self.noaf_mean, self.noaf_sd], "af": [self.af_mean, self.af_sd]}
        if self.floor is not None:
            d["floor"] = self.floor
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuousParams":
        return cls(float(d["noaf"][0]), float(d["noaf"][1]), float(d["af"][0]), float(d["af"][1]),
                   None if d.get("floor") is None else float(d["floor"]))


@dataclass(frozen=True)
class NominalParams:
    noaf: tuple[float, ...]
    af: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"noaf": list(self.noaf), "af": list(self.af)}

    @classmethod
    def from_dict(cls, d: dict) -> "NominalParams":
        return cls(tuple(float(p) for p in d["noaf"]), tuple(float(p) for p in d["af"]))


@dataclass(frozen=True)
class GeneratorSpec:
    """Everything needed to draw a cohort.

    ``correlations`` lists ``(a, b, rank_rho)`` triples for pairs of
    continuous variables; unlisted pairs are independent.
    """

    schema: Schema
    params: dict
    n_total: int = 831
    af_count: int = 191
    correlations: tuple = ()
    missing_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "correlations",
                           tuple((str(a), str(b), float(r)) for a, b, r in self.correlations))
        if not 0 < self.af_count < self.n_total:
            raise InvalidSpecError("need 0 < af_count < n_total")
        if not 0 <= self.missing_rate < 1:
            raise InvalidSpecError("missing_rate must lie in [0, 1)")
        for var in self.schema:
            p = self.params.get(var.name)
            if p is None:
                raise InvalidSpecError(f"no generator parameters for {var.name!r}")
            if var.is_nominal:
                if not isinstance(p, NominalParams):
                    raise InvalidSpecError(f"{var.name!r} is nominal but has continuous parameters")
                for probs in (p.noaf, p.af):
                    if len(probs) != len(var.categories):
                        raise InvalidSpecError(
                            f"{var.name!r}: {len(probs)} probabilities for {len(var.categories)} categories")
                    if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
                        raise InvalidSpecError(f"{var.name!r}: probabilities must be >= 0 and sum to 1")
            else:
                if not isinstance(p, ContinuousParams):
                    raise InvalidSpecError(f"{var.name!r} is continuous but has nominal parameters")
                if not (p.noaf_sd > 0 and p.af_sd > 0):
                    raise InvalidSpecError(f"{var.name!r}: standard deviations must be > 0")
        extra = set(self.params) - set(self.schema.names)
        if extra:
            raise InvalidSpecError(f"parameters for variables not in the schema: {sorted(extra)}")
        for a, b, r in self.correlations:
            for n in (a, b):
                if n not in self.schema or self.schema[n].is_nominal:
                    raise InvalidSpecError(f"correlation names {n!r}, which is not a continuous variable")
            if a == b or not -1 < r < 1:
                raise InvalidSpecError(f"bad correlation entry ({a}, {b}, {r})")

    def to_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "af_count": self.af_count,
            "missing_rate": self.missing_rate,
            "seed": self.seed,
            "schema": self.schema.to_dict(),
            "params": {n: self.params[n].to_dict() for n in self.schema.names},
            "correlations": [list(c) for c in self.correlations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        try:
            schema = Schema.from_dict(d["schema"]) if "schema" in d else default_schema()
            params = {}
            for name, p in d["params"].items():
                var = schema[name]
                params[name] = NominalParams.from_dict(p) if var.is_nominal else ContinuousParams.from_dict(p)
            return cls(schema, params, int(d.get("n_total", 831)), int(d.get("af_count", 191)),
                       tuple(tuple(c) for c in d.get("correlations", ())),
                       float(d.get("missing_rate", 0.05)), int(d.get("seed", 0)))
        except (KeyError, IndexError, TypeError, UnknownVariableError) as exc:
            raise InvalidSpecError(f"malformed generator spec: {exc}") from None

    def replace(self, **changes) -> "GeneratorSpec":
        fields = dict(schema=self.schema, params=self.params, n_total=self.n_total,
                      af_count=self.af_count, correlations=self.correlations,
                      missing_rate=self.missing_rate, seed=self.seed)
        fields.update(changes)
        return GeneratorSpec(**fields)


def load_generator_spec(path) -> GeneratorSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return GeneratorSpec.from_dict(doc)


def rank_to_pearson(rho_s):
    """Pearson correlation of a bivariate normal with Spearman correlation ``rho_s``."""
    return 2.0 * np.sin(np.pi * np.asarray(rho_s, dtype=np.float64) / 6.0)


def nearest_correlation(r: np.ndarray, eps: float = 1e-10) -> np.ndarray:
    """Clip negative eigenvalues and rescale to a unit diagonal."""
    r = (r + r.T) / 2.0
    w, v = np.linalg.eigh(r)
    if w.min() >= eps:
        return r
    w = np.maximum(w, eps)
    out = (v * w) @ v.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return out


def _copula_factor(spec: GeneratorSpec, cont_names: list[str]) -> np.ndarray | None:
    if not spec.correlations:
        return None
    pos = {n: i for i, n in enumerate(cont_names)}
    r = np.eye(len(cont_names))
    for a, b, rho in spec.correlations:
        r[pos[a], pos[b]] = r[pos[b], pos[a]] = rank_to_pearson(rho)
    return np.linalg.cholesky(nearest_correlation(r))


def generate_cohort(spec: GeneratorSpec) -> Cohort:
    """Draw a cohort with exactly ``af_count`` AF records.

    Records appear in shuffled order. The output depends only on ``spec``.
    """
    rng = np.random.default_rng([spec.seed, zlib.crc32(b"synthgen")])
    schema = spec.schema
    n_af = spec.af_count
    n_noaf = spec.n_total - n_af
    labels = np.r_[np.full(n_noaf, NO_AF), np.full(n_af, AF)].astype(np.int8)
    values = np.empty((spec.n_total, len(schema)))

    cont = [j for j, v in enumerate(schema.variables) if not v.is_nominal]
    cont_names = [schema.variables[j].name for j in cont]
    chol = _copula_factor(spec, cont_names)
    z = rng.standard_normal((spec.n_total, len(cont)))
    if chol is not None:
        z = z @ chol.T
    for c, j in enumerate(cont):
        p = spec.params[schema.variables[j].name]
        mean = np.where(labels == AF, p.af_mean, p.noaf_mean)
        sd = np.where(labels == AF, p.af_sd, p.noaf_sd)
        col = mean + sd * z[:, c]
        if p.floor is not None:
            col = np.maximum(col, p.floor)
        values[:, j] = col

    for j, var in enumerate(schema.variables):
        if not var.is_nominal:
            continue
        p = spec.params[var.name]
        u = rng.random(spec.n_total)
        for lab, probs in ((NO_AF, p.noaf), (AF, p.af)):
            rows = labels == lab
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            values[rows, j] = np.searchsorted(cum, u[rows], side="right")

    if spec.missing_rate > 0:
        values[rng.random(values.shape) < spec.missing_rate] = np.nan

    order = rng.permutation(spec.n_total)
    return Cohort(schema, values[order], labels[order], Provenance.SYNTHETIC)


# ---------------------------------------------------------------------------
# default parameters

def _c(noaf, af, floor=0.0):
    return ContinuousParams(noaf[0], noaf[1], af[0], af[1], floor)


def _yes(p_noaf, p_af):
    return NominalParams((1 - p_noaf, p_noaf), (1 - p_af, p_af))


def _normalize(p):
    s = float(sum(p))
    return tuple(x / s for x in p)


def _shifted(mean, sd, direction, effect=0.3, floor=0.0):
    """Class means ``effect`` SDs apart, in ``direction`` (+1 means AF higher)."""
    return ContinuousParams(mean, sd, mean + direction * effect * sd, sd, floor)


def _probit_shift(p_noaf, shift=0.3):
    return _yes(p_noaf, float(ndtr(ndtri(p_noaf) + shift)))


_NO_EFFECT = {
    "race": NominalParams((0.85, 0.08, 0.07), (0.85, 0.08, 0.07)),
    "height": _c((172, 10), (172, 10)),
    "weight": _c((86, 19), (86, 19)),
    "current_smoking": _yes(0.10, 0.10),
    "antihypertensive_medication": _yes(0.35, 0.35),
    "diabetes": _yes(0.10, 0.10),
    "coronary_artery_disease": _yes(0.12, 0.12),
    "prior_myocardial_infarction": _yes(0.04, 0.04),
    "heart_failure_history": _yes(0.08, 0.08),
}

DEFAULT_CORRELATIONS = (
    ("la_diameter", "e_a_ratio", 0.3),
    ("la_diameter", "e_e_prime", 0.3),
    ("e_a_ratio", "e_e_prime", 0.3),
    ("exercise_time", "exercise_mets", 0.7),
)


def default_params() -> dict:
    """Per-class parameters for every variable of the default schema.

    Published summaries are used where they exist. ``percent_max_hr_achieved``,
    ``hr_recovery_1min`` and ``abpr_followup`` get means 0.3 SD apart in their
    expected direction; ``septal_myectomy``, ``diuretic_treatment`` and
    ``dyspnea_on_exertion`` get a +0.3 probit shift for AF. The general-
    population risk factors in ``_NO_EFFECT`` are invented with no class
    difference.
    """
    p = {
        "age": _c((52, 16), (58, 13)),
        "male_sex": _yes(0.62, 0.63),
        "bmi": _c((29, 6), (30, 7)),
        "hcm_type": NominalParams(_normalize((32, 38, 30)), _normalize((30, 30, 41))),
        "nyha_class": _yes(0.41, 0.57),
        "angina": _yes(0.41, 0.36),
        "family_history_hcm": _yes(0.20, 0.19),
        "icd_implantation": _yes(0.07, 0.17),
        "syncope": _yes(0.19, 0.22),
        "family_history_scd": _yes(0.25, 0.23),
        "nonsustained_vt": _yes(0.10, 0.15),
        "septal_thickness_ge30": _yes(0.09, 0.04),
        "septal_myectomy": _probit_shift(0.20),
        "dyspnea_on_exertion": _probit_shift(0.50),
        "beta_blocker": _yes(0.68, 0.82),
        "calcium_channel_blocker": _yes(0.28, 0.35),
        "ras_blockade": _yes(0.23, 0.26),
        "disopyramide": _yes(0.02, 0.08),
        "diuretic_treatment": _probit_shift(0.15),
        "la_diameter": _c((41, 7), (45, 8)),
        "max_septal_thickness": _c((21, 5), (21, 5)),
        "lv_ejection_fraction": _c((66, 8), (64, 8)),
        "e_a_ratio": _c((1.3, 0.6), (1.7, 1.3)),
        "e_e_prime": _c((18, 11), (22, 12)),
        "rest_lvot_gradient": _c((28, 32), (32, 30)),
        "stress_lvot_gradient": _c((67, 53), (72, 54)),
        "lv_gls": _c((-16.1, 3.7), (-15.1, 3.8), floor=None),
        "lv_sr_s": _c((-1.00, 0.20), (-0.93, 0.20), floor=None),
        "lv_sr_e": _c((1.14, 0.35), (1.06, 0.31)),
        "moderate_severe_mr": _yes(0.11, 0.16),
        "lv_mass": _c((163, 69), (172, 62)),
        "lge_presence": _yes(0.63, 0.81),
        "lge_percent": _c((11, 12), (16, 13)),
        "exercise_time": _c((566, 202), (471, 193)),
        "exercise_mets": _c((10.3, 4.2), (8.8, 3.7)),
        "rest_heart_rate": _c((65, 13), (65, 14)),
        "rest_sbp": _c((133, 22), (131, 18)),
        "rest_dbp": _c((77, 11), (77, 12)),
        "stress_heart_rate": _c((145, 28), (131, 26)),
        "stress_sbp": _c((161, 36), (153, 37)),
        "stress_dbp": _c((82, 18), (77, 17)),
        "percent_max_hr_achieved": _shifted(88, 12, -1),
        "hr_recovery_1min": _shifted(21, 9, -1),
        "abpr": _yes(0.31, 0.43),
        "abpr_followup": _shifted(10, 8, +1, floor=None),
    }
    p.update(_NO_EFFECT)
    return p


def default_generator_spec(seed: int = 0, missing_rate: float = 0.05) -> GeneratorSpec:
    return GeneratorSpec(default_schema(), default_params(), 831, 191, DEFAULT_CORRELATIONS,
                         missing_rate, seed)


def selection_benchmark_spec(seed: int = 0, n_noise_continuous: int = 12,
                             n_noise_nominal: int = 8, scale: int = 3) -> GeneratorSpec:
    """The 18 predictors plus pure-noise variables, no missing cells.

    Record counts are ``scale`` times the default (``scale=3``: 2493 records,
    573 AF).
    """
    base = default_schema()
    params = default_params()
    variables = [base[n] for n in FULL18]
    use = {n: params[n] for n in FULL18}
    for i in range(1, n_noise_continuous + 1):
        name = f"noise_c{i:02d}"
        variables.append(VariableDescriptor(name, "continuous", description="pure noise"))
        use[name] = ContinuousParams(0.0, 1.0, 0.0, 1.0)
    for i in range(1, n_noise_nominal + 1):
        name = f"noise_n{i:02d}"
        k = 2 + (i % 2)
        variables.append(VariableDescriptor(name, "nominal", tuple(f"c{j}" for j in range(k)),
                                            description="pure noise"))
        probs = _normalize(range(1, k + 1))
        use[name] = NominalParams(probs, probs)
    schema = Schema(tuple(variables), base.label_name, base.excluded_names,
                    {k: list(v) for k, v in base.label_aliases.items()})
    return GeneratorSpec(schema, use, 831 * scale, 191 * scale, DEFAULT_CORRELATIONS, 0.0, seed)


# ---------------------------------------------------------------------------
# age-stratified prevalence

@dataclass(frozen=True)
class PrevalenceRow:
    lo: float
    hi: float
    n: int
    n_af: int
    prevalence: float
    flag: str = ""

    @property
    def label(self) -> str:
        return f"{self.lo:g}-{self.hi:g}"


DEFAULT_AGE_BINS = (21, 41, 61, 81)


def age_prevalence_table(cohort: Cohort, bins=DEFAULT_AGE_BINS, variable: str = "age"
                         ) -> list[PrevalenceRow]:
    """AF fraction per age bin.

    ``bins`` are edges; each bin is ``[lo, hi)`` except the last, which is
    closed. Records outside all bins and records with missing age are
    ignored. Empty bins get ``prevalence = nan`` and flag ``"EmptyBin"``.
    """
    age = cohort.column(variable)
    edges = [float(b) for b in bins]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidSpecError("age bin edges must be strictly increasing, at least two")
    rows = []
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        last = i == len(edges) - 2
        inside = (age >= lo) & ((age <= hi) if last else (age < hi))
        n = int(inside.sum())
        n_af = int(np.count_nonzero(cohort.labels[inside] == AF))
        if n == 0:
            rows.append(PrevalenceRow(lo, hi, 0, 0, math.nan, "EmptyBin"))
        else:
            rows.append(PrevalenceRow(lo, hi, n, n_af, n_af / n))
    return rows


def format_prevalence(rows: list[PrevalenceRow]) -> str:
    lines = [f"{'age':<10} {'n':>5} {'AF':>5} {'prevalence':>11}"]
    for r in rows:
        prev = "undefined" if r.flag else f"{r.prevalence:.3f}"
        lines.append(f"{r.label:<10} {r.n:>5} {r.n_af:>5} {prev:>11}")
    return "\n".join(lines)
