import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ldoup.errors import DegenerateSeriesError
from ldoup.params import reference_model
from ldoup.sampling import make_rng, sample_paths
from ldoup.stats import bartlett_band, bootstrap_cov_ci, ks_test, sample_acf


def test_ks_agrees_with_scipy(rng):
    x = rng.standard_normal(500)
    ours = ks_test(x, stats.norm.cdf)
    ref = stats.kstest(x, "norm", method="asymp")
    assert ours.statistic == pytest.approx(ref.statistic, abs=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_level():
    ok = sum(ks_test(make_rng(5, r).standard_normal(1000), stats.norm.cdf).p_value > 0.01 for r in range(100))
    assert ok >= 98


def test_ks_gross_misfit(rng):
    assert ks_test(rng.standard_normal(1000) + 5, stats.norm.cdf).p_value < 1e-6


def test_ks_single_point_at_median():
    assert ks_test([0.0], stats.norm.cdf).statistic == pytest.approx(0.5)


@given(st.integers(0, 2**31))
def test_ks_is_distribution_free(seed):
    x = np.random.default_rng(seed).standard_normal(200)
    a = ks_test(x, stats.norm.cdf).statistic
    b = ks_test(np.exp(x), lambda y: stats.norm.cdf(np.log(y))).statistic
    assert abs(a - b) < 1e-12


def test_bootstrap_covers_stationary_covariance():
    # endpoint samples of 10^4 stationary draws; a 95% interval misses now and then
    model = reference_model("wvag-ou")
    hits = 0
    for r in range(20):
        x = sample_paths(model, 0, 10_000, make_rng(3, r))[:, 0]
        ci = bootstrap_cov_ci(x, 2000, rng=make_rng(4, r))
        assert ci.lo <= ci.point <= ci.hi
        hits += ci.covers(0.0450)
    assert hits >= 17


def test_bootstrap_constant_pairs():
    ci = bootstrap_cov_ci(np.ones((50, 2)), 200, rng=0)
    assert (ci.lo, ci.hi) == (0.0, 0.0)


def test_bootstrap_needs_thirty_pairs():
    with pytest.raises(ValueError):
        bootstrap_cov_ci(np.zeros((10, 2)))


def test_bootstrap_coverage_of_zero():
    hits = 0
    for r in range(40):
        x = make_rng(7, r).standard_normal((300, 2))
        hits += bootstrap_cov_ci(x, 1000, rng=make_rng(8, r)).covers(0.0)
    assert hits >= 34


def test_bootstrap_width_shrinks_like_root_n():
    widths = []
    for n in (100, 1000, 10_000):
        x = make_rng(9, n).standard_normal((n, 2))
        ci = bootstrap_cov_ci(x, 1000, rng=make_rng(10, n))
        widths.append(ci.hi - ci.lo)
    ratios = np.array(widths[:-1]) / np.array(widths[1:])
    np.testing.assert_allclose(ratios, np.sqrt(10), rtol=0.3)


def test_acf_of_noise(rng):
    r = sample_acf(rng.standard_normal(4000), 5)
    assert r[0] == 1.0
    assert abs(r[1]) < 2 / np.sqrt(4000)


def test_acf_matches_numpy_definition(rng):
    x = rng.standard_normal(50).cumsum()
    xc = x - x.mean()
    want = np.correlate(xc, xc, "full")[49:53] / np.dot(xc, xc)
    np.testing.assert_allclose(sample_acf(x, 3), want)


def test_acf_degenerate():
    with pytest.raises(DegenerateSeriesError):
        sample_acf(np.full(20, 3.0), 2)


def test_bartlett_band_brackets_theory_and_widens_when_simultaneous():
    lo, hi = bartlett_band(0.5, 1.0, 10, 1000)
    rho = np.exp(-0.5 * np.arange(1, 11))
    assert np.all((lo < rho) & (rho < hi))
    lo2, hi2 = bartlett_band(0.5, 1.0, 10, 1000, simultaneous=True)
    assert np.all(hi2 - lo2 > hi - lo)
    # lag-one AR(1) variance is (1 - phi^2) / m
    z = stats.norm.ppf(0.975)
    assert hi[0] - rho[0] == pytest.approx(z * np.sqrt((1 - np.exp(-1.0)) / 1000))


def test_block_bootstrap_keeps_serial_dependence():
    # AR(1) pairs: the iid bootstrap understates the spread, blocks do not
    rng = make_rng(11)
    n, phi = 2000, 0.9
    e = rng.standard_normal((n, 2)) @ np.array([[1.0, 0.5], [0.0, 0.8]])
    x = np.empty_like(e)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    iid = bootstrap_cov_ci(x, 1000, rng=make_rng(12))
    blk = bootstrap_cov_ci(x, 1000, rng=make_rng(12), block=50)
    assert (blk.hi - blk.lo) > 2 * (iid.hi - iid.lo)
    assert blk.point == iid.point
