import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ldoup.errors import MassDeficitError
from ldoup.fourier import DensityGrid, FourierSpec, GridSampler, density_at, invert_cf
from ldoup.stats import ks_test


def gauss_cf(mean, cov):
    mean, cov = np.atleast_1d(mean), np.atleast_2d(cov)

    def cf(th):
        return np.exp(1j * th @ mean - 0.5 * np.einsum("...i,ij,...j->...", th, cov, th))
    return cf


def test_one_dimensional_gaussian():
    layout = FourierSpec.from_moments([0.7], [2.0], 2**12)
    g = invert_cf(gauss_cf(0.7, 2.0), layout)
    x = layout.axis()
    np.testing.assert_allclose(g.values, stats.norm(0.7, np.sqrt(2)).pdf(x), atol=1e-12)
    assert g.total_mass == pytest.approx(1.0)


def test_two_dimensional_gaussian():
    mean, cov = np.array([0.1, -0.3]), np.array([[0.18, 0.09], [0.09, 0.08]])
    layout = FourierSpec.from_moments(mean, np.diag(cov), 2**8, 2**-4)
    g = invert_cf(gauss_cf(mean, cov), layout)
    X, Y = np.meshgrid(layout.axis(0), layout.axis(1), indexing="ij")
    want = stats.multivariate_normal(mean, cov).pdf(np.stack([X, Y], -1))
    np.testing.assert_allclose(g.values, want, atol=1e-9 * want.max())
    np.testing.assert_allclose(g.mean(), mean, atol=1e-10)


def test_centred_flag_skips_the_phase():
    layout = FourierSpec(2**10, (0.02,), (1.5,))
    a = invert_cf(gauss_cf(1.5, 0.3), layout)
    b = invert_cf(gauss_cf(0.0, 0.3), layout, centred=True)
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_aliasing_grid_is_rejected():
    # a law much narrower than the spacing, sitting between nodes, rings badly
    layout = FourierSpec(2**6, (0.1,), (0.0,))
    with pytest.raises(MassDeficitError):
        invert_cf(gauss_cf(0.05, 1e-6), layout)
    g = invert_cf(gauss_cf(0.05, 1e-6), layout, check_mass=False)
    assert g.clipped_mass > 0.01


def test_spec_validation():
    with pytest.raises(ValueError):
        FourierSpec(100, (0.1,), (0.0,))
    with pytest.raises(ValueError):
        FourierSpec(64, (0.1, 0.1, 0.1), (0.0,))


def test_interpolation_is_exact_on_nodes_and_floored_outside():
    layout = FourierSpec(16, (0.5,), (0.0,))
    v = np.linspace(0, 1, 16)
    g = DensityGrid(layout, v)
    x = layout.axis()
    np.testing.assert_allclose(density_at(g, x, floor=0.0), v)
    mid = 0.5 * (x[3] + x[4])
    assert density_at(g, mid, floor=0.0) == pytest.approx(0.5 * (v[3] + v[4]))
    assert density_at(g, 1e6) == 1e-12


@given(st.floats(-3, 3), st.floats(0.2, 3.0))
def test_cdf_matches_normal(mu, s):
    layout = FourierSpec.from_moments([mu], [s**2], 2**11)
    g = invert_cf(gauss_cf(mu, s**2), layout)
    x = mu + s * np.array([-2.0, -0.5, 0.0, 1.0, 2.5])
    np.testing.assert_allclose(g.cdf(x), stats.norm(mu, s).cdf(x), atol=1e-5)


def test_sampler_reproduces_the_grid_law():
    layout = FourierSpec.from_moments([1.0], [0.5], 2**11)
    g = invert_cf(gauss_cf(1.0, 0.5), layout)
    x = GridSampler(g)(np.random.default_rng(0), 20_000)
    assert ks_test(x, stats.norm(1.0, np.sqrt(0.5)).cdf).p_value > 0.01


def test_two_dimensional_sampler_moments():
    mean, cov = np.array([0.2, -0.1]), np.array([[0.18, 0.09], [0.09, 0.08]])
    layout = FourierSpec.from_moments(mean, np.diag(cov), 2**8, 2**-4)
    g = invert_cf(gauss_cf(mean, cov), layout)
    x = GridSampler(g)(np.random.default_rng(1), 100_000)
    assert x.shape == (100_000, 2)
    assert np.all(np.abs(x.mean(0) - mean) < 4 * np.sqrt(np.diag(cov) / 1e5))
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.005)


def test_marginal_of_product_grid():
    mean, cov = np.zeros(2), np.diag([0.5, 2.0])
    layout = FourierSpec(2**8, (0.05, 0.1), (0.0, 0.0))
    g = invert_cf(gauss_cf(mean, cov), layout)
    m = g.marginal(1)
    np.testing.assert_allclose(m.values, stats.norm(0, np.sqrt(2)).pdf(m.axis()), atol=1e-9)
