import numpy as np
import pytest
from scipy import stats

from ldoup import charfn
from ldoup import likelihood as lk
from ldoup.fourier import FourierSpec, invert_cf
from ldoup.params import LdoupModel, ModelKind, ObservationSet, WvagParams
from ldoup.sampling import sample_path


@pytest.fixture(scope="module")
def mixture(wvagou):
    return lk.build_mixture(wvagou)


def test_mixture_integrates_to_one(mixture):
    assert mixture.total_mass() == pytest.approx(1.0, abs=2e-3)


def test_axis_component_matches_vg_difference(wvagou, mixture):
    # component 1 is the law of coordinate 1 given it moved and coordinate 2 did not
    t = np.linspace(-5, 5, 11)
    cf = charfn.mixture_component_cf(wvagou, 1, t)
    dens = mixture.f1
    x = dens.axis()
    emp = np.array([np.sum(np.cos(tk * x) * dens.values) * dens.layout.cell for tk in t])
    np.testing.assert_allclose(emp, cf.real, atol=1e-6)


def test_classification():
    zeta = np.array([0.1, -0.2])
    z = np.array([[0.1, -0.2], [0.5, -0.2], [0.1, 0.3], [0.5, 0.3], [0.1 + 1e-12, -0.2]])
    assert lk.classify(z, zeta).tolist() == [3, 1, 2, 0, 3]


def test_truth_beats_perturbed_parameters(wvagou, mixture):
    obs = sample_path(wvagou, 1000, 21).observations()
    st = lk.stationary_density(wvagou)
    base = lk.wvagou_loglik(wvagou, obs, mixture, st)
    assert base.n_atom_hits > 0
    for change in ({"a": 0.7}, {"alpha": [0.7, 0.5]}, {"Sigma": [[0.25, 0.09], [0.09, 0.08]]}):
        m = wvagou.replace(**change)
        other = lk.wvagou_loglik(m, obs, lk.build_mixture(m), lk.stationary_density(m))
        assert other.value < base.value


def test_atom_frequency_matches_probability(wvagou, mixture):
    obs = sample_path(wvagou, 5000, 22).observations()
    ll = lk.wvagou_loglik(wvagou, obs, mixture, lk.stationary_density(wvagou))
    p = mixture.p
    assert abs(ll.n_atom_hits / 5000 - p) < 4 * np.sqrt(p * (1 - p) / 5000)


def test_generic_likelihood_of_gaussian_ar1():
    # Gaussian innovations: the grid likelihood must match the exact AR(1) density
    lam, delta = 0.5, 1.0
    c = np.exp(-lam * delta)
    s2 = 0.3
    rng = np.random.default_rng(0)
    x = [rng.normal(0, np.sqrt(s2 * c**2 / (1 - c**2)))]
    for _ in range(300):
        x.append(c * (x[-1] + rng.normal(0, np.sqrt(s2))))
    obs = ObservationSet(np.array(x), delta)
    w = WvagParams(0.5, [1.0], [0.0], [[1.0]], [0.0])
    model = LdoupModel(ModelKind.OU_WVAG, lam, w, delta)
    var_y = s2 * c**2 / (1 - c**2)
    f = invert_cf(lambda th: np.exp(-0.5 * s2 * th[..., 0] ** 2), FourierSpec.from_moments([0.0], [s2]))
    g = invert_cf(lambda th: np.exp(-0.5 * var_y * th[..., 0] ** 2), FourierSpec.from_moments([0.0], [var_y]))
    got = lk.generic_loglik(model, obs, f, g).value
    xs = obs.data[:, 0]
    want = stats.norm(0, np.sqrt(var_y)).logpdf(xs[0]) + stats.norm(c * xs[:-1], np.sqrt(c**2 * s2)).logpdf(xs[1:]).sum()
    assert got == pytest.approx(want, abs=1e-3)


def test_marginal_likelihood_prefers_truth(wvagou):
    obs = sample_path(wvagou, 1000, 23).observations().coordinate(0)
    w = wvagou.wvag
    at = lk.marginal_vgou_loglik(0.5, w.eta[0], w.alpha[0], w.Sigma[0, 0], obs)
    assert at.n_atom_hits > 0
    assert lk.marginal_vgou_loglik(0.5, w.eta[0], 0.6, w.Sigma[0, 0], obs).value < at.value
    assert lk.marginal_vgou_loglik(0.5, w.eta[0], w.alpha[0], 0.3, obs).value < at.value


def test_stationary_density_matches_wvag_marginal(ouwvag):
    grid = lk.stationary_density(ouwvag)
    assert grid.total_mass == pytest.approx(1.0)
    np.testing.assert_allclose(grid.mean(), ouwvag.wvag.eta + ouwvag.wvag.mu, atol=1e-3)


def test_innovation_density_rejects_atoms(wvagou):
    with pytest.raises(ValueError):
        lk.innovation_density(wvagou)
