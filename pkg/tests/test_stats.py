import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from afrisk.errors import (
    DegenerateTableError,
    LengthMismatchError,
    TooFewSamplesError,
    ZeroVarianceError,
)
from afrisk.stats import (
    bvn_cdf,
    crosstab,
    entropy_bits,
    fisher_exact_rx2,
    fisher_exact_test,
    golden_section_max,
    information_gain,
    polychoric_correlation,
    polychoric_table,
    welch_t_test,
)
from oracles import bvn_cdf_mp, fisher_enum, welch_mp


class TestWelch:
    def test_reference_pair(self):
        res = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
        t, df, p = welch_mp([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
        assert res.statistic == pytest.approx(t, abs=1e-12) and t == -1.0
        assert res.df == pytest.approx(df, rel=1e-12) and df == pytest.approx(8.0)
        assert res.p_value == pytest.approx(p, abs=1e-12)
        assert res.test == "WelchT"

    def test_identical_samples(self):
        a = [3.1, 4.7, 2.2, 9.0]
        res = welch_t_test(a, list(a))
        assert res.statistic == 0.0 and res.p_value == 1.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=7), rng.normal(1, 2, size=11)
        r1, r2 = welch_t_test(a, b), welch_t_test(b, a)
        assert r1.statistic == -r2.statistic and r1.p_value == r2.p_value and r1.df == r2.df

    def test_random_vs_mpmath(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(rng.uniform(-2, 2), rng.uniform(0.2, 3), size=rng.integers(2, 40))
            b = rng.normal(rng.uniform(-2, 2), rng.uniform(0.2, 3), size=rng.integers(2, 40))
            res = welch_t_test(a, b)
            t, df, p = welch_mp(a, b)
            assert res.statistic == pytest.approx(t, rel=1e-9, abs=1e-12)
            assert res.df == pytest.approx(df, rel=1e-9)
            assert res.p_value == pytest.approx(p, abs=1e-9)

    def test_large_shifted_samples(self):
        rng = np.random.default_rng(0)
        res = welch_t_test(rng.normal(566, 202, 640), rng.normal(471, 193, 191))
        assert res.p_value < 0.001

    def test_errors_and_flags(self):
        with pytest.raises(TooFewSamplesError):
            welch_t_test([1.0], [1.0, 2.0])
        with pytest.raises(ZeroVarianceError):
            welch_t_test([2.0, 2.0], [2.0, 2.0, 2.0])
        res = welch_t_test([1.0, 1.0], [2.0, 2.0])
        assert res.p_value == 0.0 and math.isinf(res.statistic) and res.flag == "ZeroVarianceBoth"

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20),
           st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20),
           st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, a, b, scale, shift):
        try:
            r1 = welch_t_test(a, b)
        except ZeroVarianceError:
            return
        if r1.flag or np.var(a) + np.var(b) < 1e-6:
            return
        r2 = welch_t_test(np.array(a) * scale + shift, np.array(b) * scale + shift)
        assert 0.0 <= r1.p_value <= 1.0
        assert r2.p_value == pytest.approx(r1.p_value, abs=1e-7)


class TestInformationGain:
    def test_perfect_and_constant(self):
        y = np.array([0, 1, 1, 0, 1, 0, 0, 0])
        assert information_gain(y, y) == pytest.approx(entropy_bits(np.bincount(y)), abs=1e-15)
        assert information_gain(np.zeros(8), y) == 0.0

    def test_hand_table(self):
        # joint {{30,10},{10,30}}: H(y)=1, H(y|x)=H(0.25) bits
        x = np.r_[np.zeros(40), np.ones(40)]
        y = np.r_[np.zeros(30), np.ones(10), np.zeros(10), np.ones(30)]
        h = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
        assert information_gain(x, y) == pytest.approx(1.0 - h, abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            information_gain([0, 1], [0, 1, 1])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 1)), min_size=1, max_size=40),
           st.permutations([0, 1, 2, 3]))
    def test_bounds_and_relabeling(self, pairs, perm):
        x = np.array([p[0] for p in pairs])
        y = np.array([p[1] for p in pairs])
        ig = information_gain(x, y)
        assert -1e-12 <= ig <= entropy_bits(np.bincount(y)) + 1e-12
        assert information_gain(np.array(perm)[x], y) == pytest.approx(ig, abs=1e-12)


class TestFisher:
    @pytest.mark.parametrize("table", [[[10, 0], [0, 10]], [[1, 9], [11, 3]], [[3, 1], [1, 3]],
                                       [[0, 5], [7, 2]], [[30, 0], [0, 30]]])
    def test_against_enumeration(self, table):
        assert fisher_exact_test(table).p_value == pytest.approx(fisher_enum(table), abs=1e-12)

    def test_balanced(self):
        assert fisher_exact_test([[5, 5], [5, 5]]).p_value == pytest.approx(1.0, abs=1e-15)

    def test_empty_margin(self):
        res = fisher_exact_test([[0, 0], [3, 4]])
        assert res.p_value == 1.0 and res.flag

    def test_matches_scipy(self):
        from scipy.stats import fisher_exact
        rng = np.random.default_rng(5)
        for _ in range(30):
            t = rng.integers(0, 25, size=(2, 2))
            if t.sum(0).min() == 0 or t.sum(1).min() == 0:
                continue
            assert fisher_exact_test(t).p_value == pytest.approx(fisher_exact(t)[1], abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=4, max_size=4))
    def test_transpose_invariant(self, cells):
        assume(sum(cells) > 0)
        t = np.array(cells).reshape(2, 2)
        assert fisher_exact_test(t).p_value == pytest.approx(fisher_exact_test(t.T).p_value, abs=1e-12)

    def test_rx2_reduces_to_2x2(self):
        t = [[4, 9], [12, 2]]
        assert fisher_exact_rx2(t).p_value == pytest.approx(fisher_enum(t), abs=1e-12)

    def test_rx2_three_rows(self):
        # brute force over all 3x2 tables with the same margins
        from math import comb
        t = np.array([[3, 5], [6, 1], [2, 4]])
        r, c = t.sum(1), t.sum(0)
        n = t.sum()

        def prob(col0):
            return math.prod(comb(int(r[i]), int(col0[i])) for i in range(3)) / comb(int(n), int(c[0]))

        p_obs = prob(t[:, 0])
        total = 0.0
        for a in range(r[0] + 1):
            for b in range(r[1] + 1):
                cc = c[0] - a - b
                if 0 <= cc <= r[2]:
                    p = prob([a, b, cc])
                    if p <= p_obs * (1 + 1e-9):
                        total += p
        assert fisher_exact_rx2(t).p_value == pytest.approx(total, abs=1e-12)


class TestBivariateNormal:
    @pytest.mark.parametrize("h,k,r", [(0, 0, 0.5), (-1.2, 0.7, -0.8), (2.0, 1.0, 0.95),
                                       (0.3, -0.4, 0.0), (-2.5, -2.5, 0.99), (1.1, 1.3, -0.3),
                                       (-0.5, 0.2, 0.6)])
    def test_vs_quadrature(self, h, k, r):
        assert float(bvn_cdf(h, k, r)) == pytest.approx(bvn_cdf_mp(h, k, r), abs=1e-12)

    def test_zero_correlation_closed_form(self):
        from scipy.special import ndtr
        assert float(bvn_cdf(0.4, -1.0, 0.0)) == pytest.approx(ndtr(0.4) * ndtr(-1.0), abs=1e-15)
        # P(X<=0, Y<=0) = 1/4 + asin(r)/(2 pi)
        for r in (-0.9, -0.2, 0.45, 0.8):
            assert float(bvn_cdf(0, 0, r)) == pytest.approx(0.25 + math.asin(r) / (2 * math.pi), abs=1e-14)

    def test_infinite_limits(self):
        from scipy.special import ndtr
        assert float(bvn_cdf(np.inf, 0.3, 0.5)) == pytest.approx(ndtr(0.3), abs=1e-15)
        assert float(bvn_cdf(-np.inf, 0.3, 0.5)) == 0.0


class TestPolychoric:
    def test_independence(self):
        assert abs(polychoric_table([[25, 25], [25, 25]])) <= 1e-6

    def test_concordance(self):
        assert polychoric_table([[50, 0], [0, 50]]) >= 1 - 1e-3

    def test_degenerate(self):
        with pytest.raises(DegenerateTableError):
            polychoric_table([[10, 0], [0, 0]])

    def test_known_tetrachoric(self):
        # for splits at both medians P(both below) = 1/4 + asin(rho)/(2 pi)
        rho = 0.6
        p11 = 0.25 + math.asin(rho) / (2 * math.pi)
        n = 400000
        a = round(p11 * n)
        t = [[a, n // 2 - a], [n // 2 - a, a]]
        assert polychoric_table(t) == pytest.approx(rho, abs=1e-4)

    def test_reversal_flips_sign(self):
        t = np.array([[20, 5], [15, 12], [8, 20]])
        r = polychoric_table(t)
        assert polychoric_table(t[::-1]) == pytest.approx(-r, abs=1e-6)
        assert polychoric_table(t[:, ::-1]) == pytest.approx(-r, abs=1e-6)

    def test_from_columns(self):
        x = np.array([0, 0, 1, 1, 2, 2, 2, 0])
        y = np.array([0, 0, 0, 1, 1, 1, 1, 0])
        np.testing.assert_array_equal(crosstab(x, y), [[3, 0], [1, 1], [0, 3]])
        assert polychoric_correlation(x, y) > 0.5

    def test_golden_section(self):
        x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, -1, 1, 1e-9)
        assert x == pytest.approx(0.3, abs=1e-8)

    @pytest.mark.parametrize("rho", [-0.7, 0.3, 0.5])
    def test_monte_carlo(self, rho):
        rng = np.random.default_rng(11)
        z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=50000)
        x = np.digitize(z[:, 0], [-1.0, -0.3, 0.4, 1.1])
        y = (z[:, 1] > 0.5).astype(int)
        assert polychoric_table(crosstab(x, y)) == pytest.approx(rho, abs=0.05)
