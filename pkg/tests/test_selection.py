import numpy as np
import pytest

from _util import make_cohort, make_schema, random_cohort
from afrisk.errors import ValidationError
from afrisk.featuresets import FULL18, FULL18_SIGNS
from afrisk.selection import (
    FeatureReport,
    SelectionConfig,
    feature_names,
    permutation_ig_cutoff,
    quantile_bins,
    read_feature_report,
    select_features,
    write_feature_report,
)
from afrisk.stats import welch_t_test
from afrisk.synthgen import generate_cohort, selection_benchmark_spec


@pytest.fixture(scope="module")
def benchmark():
    c = generate_cohort(selection_benchmark_spec(seed=0))
    return c, select_features(c, SelectionConfig(seed=0))


def test_benchmark_recovery(benchmark):
    _, rep = benchmark
    sel = set(rep.selected_names)
    assert set(FULL18) <= sel
    noise = [n for n in sel if n.startswith("noise")]
    assert len(noise) <= 2
    for n in FULL18:
        assert rep[n].sign == FULL18_SIGNS[n], n


def test_report_structure(benchmark):
    c, rep = benchmark
    kinds = [r.kind.value for r in rep.rows]
    n_cont = kinds.count("continuous")
    assert all(k == "continuous" for k in kinds[:n_cont])
    ps = [r.p_value for r in rep.rows[:n_cont]]
    assert ps == sorted(ps)
    igs = [r.information_gain for r in rep.rows[n_cont:]]
    assert igs == sorted(igs, reverse=True)
    for r in rep.rows:
        assert -1.0 <= r.polychoric_rho <= 1.0
        assert (r.sign == "positive") == (r.polychoric_rho > 0)
        if r.selected and r.kind.value == "continuous":
            assert r.p_value <= 0.06
        if r.selected and r.kind.value == "nominal":
            assert r.information_gain > r.ig_cutoff
    assert rep.selected_names == [n for n in c.schema.names if rep[n].selected]


def test_welch_p_matches_kernel(benchmark):
    c, rep = benchmark
    x = c.column("la_diameter")
    assert rep["la_diameter"].p_value == welch_t_test(x[c.labels == 1], x[c.labels == 0]).p_value


def test_shuffle_invariance(benchmark):
    c, rep = benchmark
    perm = np.random.default_rng(1).permutation(len(c))
    rep2 = select_features(c.take(perm), SelectionConfig(seed=0))
    assert rep2.selected_names == rep.selected_names
    for r in rep.rows:
        r2 = rep2[r.name]
        assert r2.polychoric_rho == pytest.approx(r.polychoric_rho, abs=1e-9)
        if r.p_value is not None:
            assert r2.p_value == pytest.approx(r.p_value, rel=1e-9, abs=1e-300)
        else:
            assert r2.information_gain == pytest.approx(r.information_gain, abs=1e-12)
            assert r2.ig_cutoff == r.ig_cutoff


def test_monotone_rescaling_invariance():
    c = random_cohort(np.random.default_rng(2), 60, 40, shift=0.5)
    vals = c.values.copy()
    vals[:, 0] = np.exp(vals[:, 0])  # strictly increasing
    a = select_features(c)
    b = select_features(c.replace(values=vals))
    assert b["x0"].polychoric_rho == pytest.approx(a["x0"].polychoric_rho, abs=1e-12)
    vals = c.values.copy()
    vals[:, 1] = 3.0 * vals[:, 1] - 7.0
    b = select_features(c.replace(values=vals))
    assert b["x1"].p_value == pytest.approx(a["x1"].p_value, rel=1e-9)


def test_nominal_identical_to_label():
    s = make_schema(("g", "nominal", ["no", "yes"]))
    y = np.array([0, 1] * 20)
    rep = select_features(make_cohort(s, y[:, None], y))
    assert rep["g"].selected
    assert rep["g"].polychoric_rho == pytest.approx(1 - 1e-6, abs=1e-9)


def test_null_false_selection_rate():
    rng = np.random.default_rng(123)
    hits = total = 0
    for _ in range(30):
        c = random_cohort(rng, 80, 40, n_cont=10, n_nom=1)
        rep = select_features(c, SelectionConfig(n_permutations=20))
        hits += sum(rep[f"x{i}"].selected for i in range(10))
        total += 10
    assert 0.02 <= hits / total <= 0.11


def test_nominal_rules():
    c = random_cohort(np.random.default_rng(4), 50, 50, n_cont=1, n_nom=4)
    top = select_features(c, SelectionConfig(nominal_rule="top_k", top_k=2))
    chosen = [r.name for r in top.rows if r.selected and r.kind.value == "nominal"]
    assert len(chosen) <= 2
    thr = select_features(c, SelectionConfig(nominal_rule="threshold", ig_min=1.0))
    assert not any(r.selected for r in thr.rows if r.kind.value == "nominal")
    with pytest.raises(ValidationError):
        SelectionConfig(continuous_p_max=1.5)
    with pytest.raises(ValidationError):
        SelectionConfig(nominal_rule="top_k")


def test_quantile_bins_rank_based():
    x = np.array([5.0, 1.0, 3.0, 3.0, 9.0, 7.0, 2.0, 8.0, 4.0, 6.0])
    b = quantile_bins(x, 5)
    assert b.min() == 0 and b.max() == 4
    np.testing.assert_array_equal(quantile_bins(np.exp(x), 5), b)
    assert b[2] == b[3]


def test_permutation_cutoff_order_free():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 3, 100)
    y = rng.integers(0, 2, 100)
    p = rng.permutation(100)
    assert permutation_ig_cutoff(x, y, 50, 0.95, 7) == permutation_ig_cutoff(x[p], y[p], 50, 0.95, 7)


def test_report_csv_roundtrip(tmp_path, benchmark):
    c, rep = benchmark
    write_feature_report(rep, tmp_path / "r.csv")
    back = read_feature_report(tmp_path / "r.csv", c.schema)
    assert isinstance(back, FeatureReport)
    assert back.selected_names == rep.selected_names
    for r in rep.rows:
        assert back[r.name] == r


def test_feature_names_dedupes():
    assert feature_names(["a", "b", "a"]) == ["a", "b"]


def test_requires_complete_cohort():
    s = make_schema(("x", "continuous"))
    c = make_cohort(s, [[1.0], [np.nan], [2.0], [3.0]], [0, 1, 0, 1])
    with pytest.raises(ValidationError):
        select_features(c)


def test_constant_in_both_classes_raises():
    from afrisk.errors import ZeroVarianceError
    s = make_schema(("x", "continuous"), ("y", "continuous"))
    c = make_cohort(s, [[1.0, 0.1], [1.0, 0.5], [1.0, 0.3], [1.0, 0.9]], [0, 0, 1, 1])
    with pytest.raises(ZeroVarianceError):
        select_features(c)
