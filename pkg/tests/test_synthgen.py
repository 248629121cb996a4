import json

import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import spearmanr

from afrisk.cohort import Provenance
from afrisk.errors import InvalidSpecError
from afrisk.featuresets import FULL18, FULL18_SIGNS
from afrisk.synthgen import (
    DEFAULT_AGE_BINS,
    ContinuousParams,
    GeneratorSpec,
    NominalParams,
    age_prevalence_table,
    default_generator_spec,
    default_params,
    format_prevalence,
    generate_cohort,
    load_generator_spec,
    nearest_correlation,
    rank_to_pearson,
    selection_benchmark_spec,
)


@pytest.fixture(scope="module")
def big():
    spec = default_generator_spec(seed=3, missing_rate=0.0).replace(n_total=20000, af_count=5000)
    return generate_cohort(spec)


def test_default_counts_and_provenance(default_raw):
    assert len(default_raw) == 831
    assert default_raw.class_counts() == (640, 191)
    assert default_raw.provenance is Provenance.SYNTHETIC


def test_deterministic_per_seed():
    a = generate_cohort(default_generator_spec(5))
    b = generate_cohort(default_generator_spec(5))
    c = generate_cohort(default_generator_spec(6))
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.labels, c.labels)


def test_missing_rate(default_raw):
    rate = default_raw.missing_mask.mean()
    cells = default_raw.values.size
    assert abs(rate - 0.05) < 4 * np.sqrt(0.05 * 0.95 / cells)
    assert not generate_cohort(default_generator_spec(0, missing_rate=0.0)).has_missing


def test_class_means_and_frequencies(big):
    params = default_params()
    af = big.labels == 1
    for name in ("age", "la_diameter", "exercise_time", "stress_dbp"):
        p = params[name]
        col = big.column(name)
        assert col[~af].mean() == pytest.approx(p.noaf_mean, abs=4 * p.noaf_sd / np.sqrt((~af).sum()))
        assert col[af].mean() == pytest.approx(p.af_mean, abs=4 * p.af_sd / np.sqrt(af.sum()))
    col = big.column("lge_presence")
    assert col[af].mean() == pytest.approx(params["lge_presence"].af[1], abs=0.03)
    assert col[~af].mean() == pytest.approx(params["lge_presence"].noaf[1], abs=0.03)


def test_floor_applied(big):
    assert big.column("age").min() >= 0.0
    assert big.column("lv_gls").max() < 0.0


def test_direction_of_full18(big):
    af = big.labels == 1
    for name in FULL18:
        col = big.column(name)
        diff = col[af].mean() - col[~af].mean()
        assert (diff > 0) == (FULL18_SIGNS[name] == "positive"), name


def test_rank_correlation_within_class(big):
    noaf = big.labels == 0
    rho = spearmanr(big.column("exercise_time")[noaf], big.column("exercise_mets")[noaf])[0]
    assert rho == pytest.approx(0.7, abs=0.03)
    rho = spearmanr(big.column("la_diameter")[noaf], big.column("e_a_ratio")[noaf])[0]
    assert rho == pytest.approx(0.3, abs=0.04)


def test_rank_to_pearson():
    assert rank_to_pearson(0.0) == 0.0
    assert rank_to_pearson(1.0) == pytest.approx(1.0)
    # inverse map: rho_s = 6/pi * asin(r/2)
    r = rank_to_pearson(0.45)
    assert 6 / np.pi * np.arcsin(r / 2) == pytest.approx(0.45, abs=1e-14)


def test_nearest_correlation_repairs_indefinite():
    r = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    assert np.linalg.eigvalsh(r).min() < 0
    fixed = nearest_correlation(r)
    assert np.linalg.eigvalsh(fixed).min() > 0
    np.testing.assert_allclose(np.diag(fixed), 1.0)
    np.testing.assert_allclose(fixed, fixed.T)
    good = np.array([[1.0, 0.2], [0.2, 1.0]])
    np.testing.assert_array_equal(nearest_correlation(good), good)


def test_age_prevalence_expectation_nondecreasing():
    p = default_params()["age"]
    n_noaf, n_af = 640, 191
    edges = DEFAULT_AGE_BINS
    prev = []
    for lo, hi in zip(edges, edges[1:]):
        m_af = ndtr((hi - p.af_mean) / p.af_sd) - ndtr((lo - p.af_mean) / p.af_sd)
        m_no = ndtr((hi - p.noaf_mean) / p.noaf_sd) - ndtr((lo - p.noaf_mean) / p.noaf_sd)
        prev.append(n_af * m_af / (n_af * m_af + n_noaf * m_no))
    assert prev == sorted(prev)


def test_age_prevalence_large_sample(big):
    rows = age_prevalence_table(big)
    assert [r.label for r in rows] == ["21-41", "41-61", "61-81"]
    vals = [r.prevalence for r in rows]
    assert vals == sorted(vals)
    assert "prevalence" in format_prevalence(rows)


def test_age_prevalence_edges_and_empty(default_raw):
    rows = age_prevalence_table(default_raw, bins=(200, 300, 400))
    assert all(r.flag == "EmptyBin" and np.isnan(r.prevalence) for r in rows)
    assert "undefined" in format_prevalence(rows)
    with pytest.raises(InvalidSpecError):
        age_prevalence_table(default_raw, bins=(40, 20))


def test_spec_roundtrip(tmp_path):
    spec = default_generator_spec(seed=9)
    p = tmp_path / "g.json"
    p.write_text(json.dumps(spec.to_dict()))
    back = load_generator_spec(p)
    assert back.to_dict() == spec.to_dict()
    np.testing.assert_array_equal(generate_cohort(back).values, generate_cohort(spec).values)


def test_spec_json_error_location(tmp_path):
    p = tmp_path / "g.json"
    p.write_text('{\n "seed": 1,\n "params": {,}\n}')
    with pytest.raises(InvalidSpecError, match=r"g\.json:3:"):
        load_generator_spec(p)


def test_spec_validation():
    spec = default_generator_spec()
    with pytest.raises(InvalidSpecError):
        spec.replace(af_count=0)
    with pytest.raises(InvalidSpecError):
        spec.replace(missing_rate=1.0)
    with pytest.raises(InvalidSpecError):
        spec.replace(correlations=(("age", "male_sex", 0.2),))
    with pytest.raises(InvalidSpecError):
        spec.replace(correlations=(("age", "age", 0.2),))
    params = dict(spec.params)
    params["age"] = ContinuousParams(50, 0, 55, 10)
    with pytest.raises(InvalidSpecError):
        spec.replace(params=params)
    params = dict(spec.params)
    params["male_sex"] = NominalParams((0.5, 0.6), (0.5, 0.5))
    with pytest.raises(InvalidSpecError):
        spec.replace(params=params)
    params = dict(spec.params)
    del params["bmi"]
    with pytest.raises(InvalidSpecError):
        GeneratorSpec(spec.schema, params)
    with pytest.raises(InvalidSpecError):
        GeneratorSpec.from_dict({"params": {"age": {"noaf": [1]}}})


def test_benchmark_spec_layout():
    spec = selection_benchmark_spec(seed=0)
    names = spec.schema.names
    assert list(names[:18]) == list(FULL18)
    assert sum(n.startswith("noise_c") for n in names) == 12
    assert sum(n.startswith("noise_n") for n in names) == 8
    assert spec.n_total == 2493 and spec.af_count == 573 and spec.missing_rate == 0.0


def test_la_diameter_class_means_seed0(default_raw):
    x = default_raw.column("la_diameter")
    noaf = np.nanmean(x[default_raw.labels == 0])
    af = np.nanmean(x[default_raw.labels == 1])
    # frozen regression values for seed 0
    assert noaf == pytest.approx(41.42489623940711, abs=1e-9)
    assert af == pytest.approx(43.99141277211509, abs=1e-9)
    n_af = np.count_nonzero(~np.isnan(x[default_raw.labels == 1]))
    assert abs(af - 45) < 4 * 8 / np.sqrt(n_af)


def test_age_prevalence_seed0_frozen(default_raw):
    rows = age_prevalence_table(default_raw)
    assert [(r.n, r.n_af) for r in rows] == [(145, 19), (357, 95), (225, 57)]


def test_moments_converge_without_copula():
    spec = default_generator_spec(0, missing_rate=0.0).replace(correlations=(), n_total=50_000,
                                                                af_count=25_000)
    c = generate_cohort(spec)
    checked = 0
    for var in spec.schema:
        if var.is_nominal:
            continue
        p = spec.params[var.name]
        for lab, mean, sd in ((0, p.noaf_mean, p.noaf_sd), (1, p.af_mean, p.af_sd)):
            if p.floor is not None and (mean - p.floor) / sd < 4:
                continue  # truncation at the floor shifts the moments by design
            col = c.column(var.name)[c.labels == lab]
            assert abs(col.mean() - mean) <= 0.01 * abs(mean), var.name
            assert abs(col.std(ddof=1) - sd) <= 0.01 * sd, var.name
            checked += 1
    assert checked >= 30


def test_age_prevalence_separated_groups():
    from _util import make_cohort, make_schema
    s = make_schema(("age", "continuous"))
    c = make_cohort(s, [[30.0], [35.0], [70.0], [75.0]], [0, 0, 1, 1])
    rows = age_prevalence_table(c, bins=(20, 50, 80))
    assert [r.prevalence for r in rows] == [0.0, 1.0]
