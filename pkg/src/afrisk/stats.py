"""Statistical kernels: Welch t-test, information gain, Fisher exact test,
bivariate normal probabilities and the polychoric correlation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln, ndtr, ndtri

from .errors import (
    DegenerateTableError,
    LengthMismatchError,
    NonFiniteError,
    TooFewSamplesError,
    ValidationError,
    ZeroVarianceError,
)

WELCH_T = "WelchT"
FISHER_EXACT = "FisherExact"

# Relative slack when deciding whether a table is "no more probable" than the
# observed one; absorbs rounding in the log-space hypergeometric terms.
_FISHER_RTOL = 1e-7

POLYCHORIC_EPS = 1e-6
POLYCHORIC_XTOL = 1e-7


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: float
    p_value: float
    test: str
    flag: str = ""

    __test__ = False  # keep pytest from collecting this class


def welch_t_test(a, b) -> TestResult:
    """Two-sample t test without the equal-variance assumption.

    Returns the t statistic for ``mean(a) - mean(b)``, the Welch-Satterthwaite
    degrees of freedom and the two-sided p-value.

    Two constant samples with different means give ``t = ±inf`` and
    ``p = 0`` with ``flag="ZeroVarianceBoth"``; two identical constant samples
    raise :class:`ZeroVarianceError` since no p-value is defined.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise TooFewSamplesError(f"Welch t test needs >= 2 values per sample (got {na}, {nb})")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        if ma == mb:
            raise ZeroVarianceError("both samples are constant and equal; p-value undefined")
        t = math.copysign(math.inf, ma - mb)
        return TestResult(t, float(na + nb - 2), 0.0, WELCH_T, "ZeroVarianceBoth")
    qa, qb = va / na, vb / nb
    se2 = qa + qb
    t = (ma - mb) / math.sqrt(se2)
    ra, rb = qa / se2, qb / se2  # shares of se2; avoids underflow in the squares
    df = 1.0 / (ra * ra / (na - 1) + rb * rb / (nb - 1))
    # two-sided tail of Student's t: I_{df/(df+t^2)}(df/2, 1/2)
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TestResult(float(t), float(df), min(max(p, 0.0), 1.0), WELCH_T)


def entropy_bits(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum() / math.log(2.0))


def information_gain(x, y) -> float:
    """Mutual information between a nominal column and the labels, in bits."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.size != y.size:
        raise LengthMismatchError(f"x has {x.size} values, y has {y.size}")
    if x.size == 0:
        raise TooFewSamplesError("information gain of an empty column")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    joint = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(joint, (xi, yi), 1.0)
    return _information_gain_table(joint)


def _information_gain_table(joint: np.ndarray) -> float:
    n = joint.sum()
    h_y = entropy_bits(joint.sum(axis=0))
    h_cond = 0.0
    for row in joint:
        m = row.sum()
        if m > 0:
            h_cond += (m / n) * entropy_bits(row)
    return min(max(h_y - h_cond, 0.0), h_y)


def _check_count_table(table, shape=None) -> np.ndarray:
    t = np.asarray(table)
    if shape is not None and t.shape != shape:
        raise ValidationError(f"expected a {shape[0]}x{shape[1]} table, got shape {t.shape}")
    if t.ndim != 2 or not np.all(np.isfinite(t)) or np.any(t < 0) or np.any(t != np.round(t)):
        raise ValidationError("contingency table must hold nonnegative integer counts")
    if t.sum() <= 0:
        raise ValidationError("contingency table is empty")
    return t.astype(np.int64)


def _log_comb(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def fisher_exact_test(table) -> TestResult:
    """Two-sided Fisher exact test for a 2x2 table.

    The p-value sums the hypergeometric probabilities of every table with the
    observed margins that is no more probable than the observed table. The
    statistic is the sample odds ratio ``(a*d)/(b*c)``. A zero margin gives
    ``p = 1`` with ``flag="EmptyMargin"``.
    """
    t = _check_count_table(table, (2, 2))
    (a, b), (c, d) = t.tolist()
    odds = (a * d) / (b * c) if b * c else (math.inf if a * d else math.nan)
    r1, r2, c1 = a + b, c + d, a + c
    if min(r1, r2, c1, b + d) == 0:
        return TestResult(odds, math.nan, 1.0, FISHER_EXACT, "EmptyMargin")
    support = np.arange(max(0, c1 - r2), min(r1, c1) + 1)
    logw = _log_comb(r1, support) + _log_comb(r2, c1 - support)
    return TestResult(odds, math.nan, _two_sided(logw, logw[a - support[0]]), FISHER_EXACT)


def _two_sided(logw: np.ndarray, log_obs: float) -> float:
    top = logw.max()
    w = np.exp(logw - top)
    keep = logw <= log_obs + math.log1p(_FISHER_RTOL)
    return float(min(w[keep].sum() / w.sum(), 1.0))


def fisher_exact_rx2(table) -> TestResult:
    """Fisher-Freeman-Halton exact test for an r x 2 table (full enumeration).

    Used for nominal variables with more than two categories; the cost grows
    like the product of the row totals, so it is meant for small r.
    """
    t = _check_count_table(table)
    if t.shape[1] != 2:
        raise ValidationError("fisher_exact_rx2 expects a table with 2 columns")
    t = t[t.sum(axis=1) > 0]
    if t.shape[0] < 2 or np.any(t.sum(axis=0) == 0):
        return TestResult(math.nan, math.nan, 1.0, FISHER_EXACT, "EmptyMargin")
    if t.shape[0] == 2:
        res = fisher_exact_test(t)
        return TestResult(math.nan, math.nan, res.p_value, FISHER_EXACT, res.flag)
    rows = t.sum(axis=1)
    col1 = int(t[:, 0].sum())
    logc = [_log_comb(r, np.arange(r + 1)) for r in rows]
    log_obs = sum(lc[k] for lc, k in zip(logc, t[:, 0]))

    head, (r_prev, r_last) = rows[:-2], rows[-2:]
    lc_prev, lc_last = logc[-2], logc[-1]
    chunks = []
    for combo in itertools.product(*(range(r + 1) for r in head)):
        rem = col1 - sum(combo)
        if rem < 0:
            continue
        lo, hi = max(0, rem - r_last), min(r_prev, rem)
        if lo > hi:
            continue
        k = np.arange(lo, hi + 1)
        base = sum(lc[c] for lc, c in zip(logc, combo))
        chunks.append(base + lc_prev[k] + lc_last[rem - k])
    logw = np.concatenate(chunks)
    return TestResult(math.nan, math.nan, _two_sided(logw, log_obs), FISHER_EXACT)


# --------------------------------------------------------------------------
# Bivariate normal CDF (Genz's refinement of the Drezner-Wesolowsky method)

_GL_W = {
    6: [0.1713244923791705, 0.3607615730481384, 0.4679139345726904],
    12: [0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
         0.2031674267230659, 0.2334925365383547, 0.2491470458134029],
    20: [0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
         0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
         0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
         0.1527533871307259],
}
_GL_X = {
    6: [0.9324695142031522, 0.6612093864662647, 0.2386191860831970],
    12: [0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
         0.5873179542866171, 0.3678314989981802, 0.1252334085114692],
    20: [0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
         0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
         0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
         0.07652652113349733],
}
_TWO_PI = 2.0 * math.pi


def _bvn_upper(h: np.ndarray, k: np.ndarray, r: float) -> np.ndarray:
    """P(X > h, Y > k) for a standard bivariate normal with correlation r.

    ``h`` and ``k`` are finite arrays of equal shape.
    """
    ar = abs(r)
    n = 6 if ar < 0.3 else (12 if ar < 0.75 else 20)
    w = np.array(_GL_W[n] * 2)
    xg = np.array(_GL_X[n])
    x = np.concatenate([1.0 - xg, 1.0 + xg])
    hk = h * k
    if ar < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r) / 2.0
        sn = np.sin(asr * x)
        e = np.exp((np.multiply.outer(hk, sn) - hs[..., None]) / (1.0 - sn * sn))
        return np.clip(e @ w * asr / _TWO_PI + ndtr(-h) * ndtr(-k), 0.0, 1.0)

    if r < 0:
        k = -k
        hk = -hk
    bvn = np.zeros_like(h)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if ar < 1.0:
            as_ = 1.0 - r * r
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            asr = -(bs / as_ + hk) / 2.0
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            bvn = np.where(asr > -100.0,
                           a * np.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0
                                              + c * d * as_ * as_), 0.0)
            b = np.sqrt(bs)
            sp = math.sqrt(_TWO_PI) * ndtr(-b / a)
            bvn = np.where(hk > -100.0,
                           bvn - np.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0),
                           bvn)
            a /= 2.0
            xs = (a * x) ** 2
            asr2 = -(bs[..., None] / xs + hk[..., None]) / 2.0
            sp2 = 1.0 + c[..., None] * xs * (1.0 + 5.0 * d[..., None] * xs)
            rs = np.sqrt(1.0 - xs)
            ep = np.exp(-(hk[..., None] / 2.0) * xs / (1.0 + rs) ** 2) / rs
            terms = np.where(asr2 > -100.0, np.exp(asr2) * (sp2 - ep), 0.0)
            bvn = (a * (terms @ w) - bvn) / _TWO_PI
        if r > 0:
            bvn = bvn + ndtr(-np.maximum(h, k))
        else:
            span = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
            bvn = np.where(h >= k, -bvn, span - bvn)
    return np.clip(bvn, 0.0, 1.0)


def bvn_cdf(h, k, r: float) -> np.ndarray:
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation ``r``.

    Accepts infinite limits. Accuracy is about 1e-15 absolute.
    """
    if not -1.0 <= r <= 1.0:
        raise ValidationError(f"correlation {r} outside [-1, 1]")
    h, k = np.broadcast_arrays(np.asarray(h, dtype=np.float64), np.asarray(k, dtype=np.float64))
    out = np.empty(h.shape)
    fin = np.isfinite(h) & np.isfinite(k)
    out[fin] = _bvn_upper(-h[fin], -k[fin], float(r))
    lo = (h == -np.inf) | (k == -np.inf)
    out[lo] = 0.0
    hi_h = (h == np.inf) & ~lo
    out[hi_h] = ndtr(k[hi_h])
    hi_k = (k == np.inf) & ~lo & ~(h == np.inf)
    out[hi_k] = ndtr(h[hi_k])
    if np.isnan(h).any() or np.isnan(k).any():
        raise ValidationError("NaN limit passed to bvn_cdf")
    return out


# --------------------------------------------------------------------------
# Polychoric correlation


def _thresholds(margin: np.ndarray) -> np.ndarray:
    cum = np.cumsum(margin)[:-1] / margin.sum()
    return ndtri(cum)


def _cell_probabilities(row_t, col_t, rho: float) -> np.ndarray:
    a = np.concatenate([[-np.inf], row_t, [np.inf]])
    b = np.concatenate([[-np.inf], col_t, [np.inf]])
    grid = bvn_cdf(a[:, None], b[None, :], rho)
    return grid[1:, 1:] - grid[:-1, 1:] - grid[1:, :-1] + grid[:-1, :-1]


def polychoric_loglik(table, rho: float, row_t=None, col_t=None) -> float:
    """Multinomial log-likelihood of ``table`` under latent correlation ``rho``."""
    t = np.asarray(table, dtype=np.float64)
    if row_t is None:
        row_t = _thresholds(t.sum(axis=1))
    if col_t is None:
        col_t = _thresholds(t.sum(axis=0))
    pi = _cell_probabilities(row_t, col_t, rho)
    nz = t > 0
    ll = float(np.sum(t[nz] * np.log(np.maximum(pi[nz], 1e-300))))
    if not math.isfinite(ll):
        raise NonFiniteError(f"non-finite polychoric log-likelihood at rho={rho}")
    return ll


def golden_section_max(f, lo: float, hi: float, xtol: float):
    """Maximise a unimodal scalar function on ``[lo, hi]``.

    Returns ``(x, f(x))``. The endpoints are checked as well so a maximum on
    the boundary is returned exactly.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    best = (x, f(x))
    for edge in (lo, hi):
        if abs(edge - x) <= 2 * xtol:
            fe = f(edge)
            if fe > best[1]:
                best = (edge, fe)
    return best


def polychoric_table(table, eps: float = POLYCHORIC_EPS, xtol: float = POLYCHORIC_XTOL) -> float:
    """Polychoric correlation of an ordinal contingency table.

    Two-step estimator: thresholds from the inverse-normal cumulative
    marginals, then the correlation maximising the multinomial likelihood,
    searched on ``[-1 + eps, 1 - eps]``. Empty rows and columns are dropped.
    """
    t = _check_count_table(table).astype(np.float64)
    t = t[t.sum(axis=1) > 0][:, t.sum(axis=0) > 0]
    if t.shape[0] < 2 or t.shape[1] < 2:
        raise DegenerateTableError(
            f"polychoric correlation needs >= 2 nonzero rows and columns (table {t.shape})")
    row_t = _thresholds(t.sum(axis=1))
    col_t = _thresholds(t.sum(axis=0))
    rho, _ = golden_section_max(lambda r: polychoric_loglik(t, r, row_t, col_t),
                                -1.0 + eps, 1.0 - eps, xtol)
    return float(rho)


def crosstab(x, y) -> np.ndarray:
    """Contingency table of two ordinal columns, levels in ascending order."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.size != y.size:
        raise LengthMismatchError(f"x has {x.size} values, y has {y.size}")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1 if xi.size else 0, yi.max() + 1 if yi.size else 0), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)
    return table


def polychoric_correlation(x, y, eps: float = POLYCHORIC_EPS) -> float:
    """Polychoric correlation between two ordinal columns.

    Levels are ordered by their natural sort order.
    """
    table = crosstab(x, y)
    if table.size == 0:
        raise DegenerateTableError("empty columns")
    return polychoric_table(table, eps=eps)
