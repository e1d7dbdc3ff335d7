import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from ldoup import charfn
from ldoup.charfn import QuadratureSpec
from ldoup.errors import DimensionUnsupportedError, QuadratureNotConvergedError
from ldoup.params import LdoupModel, ModelKind, WvagParams
from ldoup.sampling import sample_wvag

from .conftest import theta_square


def gamma_mixture_cf(b, mu, s2, theta):
    """CF of mu*G + sqrt(s2*G)*N with G ~ Gamma(shape b, rate b), by quadrature."""
    dens = stats.gamma(b, scale=1 / b).pdf
    re = integrate.quad(lambda g: np.exp(-0.5 * theta**2 * s2 * g) * np.cos(theta * mu * g) * dens(g),
                        0, np.inf, limit=200)[0]
    im = integrate.quad(lambda g: np.exp(-0.5 * theta**2 * s2 * g) * np.sin(theta * mu * g) * dens(g),
                        0, np.inf, limit=200)[0]
    return re + 1j * im


@pytest.mark.parametrize("b,mu,s2,theta", [(2.0, 0.3, 0.5, 1.7), (1 / 0.9, 0.15, 0.18, -4.0),
                                           (5.0, -0.2, 0.05, 0.3)])
def test_vg_matches_gamma_mixture(b, mu, s2, theta):
    got = np.exp(charfn.vg_psi(b, mu, s2, theta))
    assert got == pytest.approx(gamma_mixture_cf(b, mu, s2, theta), abs=1e-9)


def test_wvag_marginals_are_vg(ouwvag):
    w = ouwvag.wvag
    t = np.linspace(-8, 8, 33)
    for k in range(2):
        th = np.zeros((t.size, 2))
        th[:, k] = t
        want = 1j * t * w.eta[k] + charfn.vg_psi(1 / w.alpha[k], w.mu[k], w.Sigma[k, k], t)
        np.testing.assert_allclose(charfn.wvag_psi(w, th), want, atol=1e-13)


def test_wvag_matches_sampled_cf(ouwvag):
    rng = np.random.default_rng(3)
    x = sample_wvag(ouwvag.wvag, 1.0, rng, 200_000)
    th = theta_square(3.0, 5)
    emp = np.exp(1j * x @ th.T).mean(0)
    np.testing.assert_allclose(emp, np.exp(charfn.wvag_psi(ouwvag.wvag, th)), atol=5 / np.sqrt(x.shape[0]))


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_wvag_exponent_is_hermitian_and_bounded(t1, t2):
    w = WvagParams(1.0, [0.9, 0.5], [0.15, -0.06], [[0.18, 0.09], [0.09, 0.08]], [-0.06, 0.0])
    th = np.array([t1, t2])
    psi = charfn.wvag_psi(w, th)
    assert psi.real <= 1e-12
    assert charfn.wvag_psi(w, -th) == pytest.approx(np.conj(psi), abs=1e-10)


def test_gaussian_driver_closed_forms():
    # standard Brownian driver: Z* has variance (e^{2L}-1)/2, the stationary law 1/2
    def bdlp(th):
        return -0.5 * np.sum(np.atleast_2d(th) ** 2, axis=-1).reshape(np.shape(th)[:-1])

    th = theta_square(5.0, 11)
    lam, delta = 0.8, 0.5
    L = lam * delta
    z = charfn.ou_zstar_psi(bdlp, lam, delta, th)
    np.testing.assert_allclose(z, -0.25 * np.expm1(2 * L) * (th**2).sum(-1), atol=1e-10)
    y = charfn.ou_stationary_psi(bdlp, th)
    np.testing.assert_allclose(y, -0.25 * (th**2).sum(-1), atol=1e-8)


def test_wvagou_closed_form_matches_quadrature(wvagou):
    th = theta_square()
    closed = charfn.wvagou_zstar_psi(wvagou, th)
    quad = charfn.ou_zstar_psi(charfn.bdlp_psi(wvagou), wvagou.lam, wvagou.delta, th)
    assert np.max(np.abs(closed - quad)) < 1e-8


def test_bdlp_is_directional_derivative_of_stationary(wvagou):
    th = theta_square()
    h = 1e-6
    psi = lambda t: charfn.wvag_psi(wvagou.wvag, t)
    grad = np.stack([(psi(th + h * e) - psi(th - h * e)) / (2 * h) for e in np.eye(2)], -1)
    want = (grad * th).sum(-1)
    got = charfn.wvagou_bdlp_psi(wvagou, th)
    scale = np.maximum(np.abs(want), 1e-3)
    assert np.max(np.abs(got - want) / scale) < 1e-6


def test_structured_ouwvag_matches_generic_quadrature(ouwvag):
    th = theta_square(10.0, 9)
    drv = charfn.bdlp_psi(ouwvag)
    quad = QuadratureSpec(nodes=64)
    np.testing.assert_allclose(charfn.ouwvag_zstar_psi(ouwvag, th),
                               charfn.ou_zstar_psi(drv, ouwvag.lam, ouwvag.delta, th, quad), atol=1e-8)
    np.testing.assert_allclose(charfn.ouwvag_stationary_psi(ouwvag.wvag, th),
                               charfn.ou_stationary_psi(drv, th, quad), atol=1e-7)


def test_ouwvag_stationary_is_self_decomposable(ouwvag):
    # Psi_Y(theta) = Psi_Y(e^{-L} theta) + Psi_{Z*}(e^{-L} theta)
    th = theta_square(6.0, 7)
    c = np.exp(-ouwvag.lam * ouwvag.delta)
    lhs = charfn.ouwvag_stationary_psi(ouwvag.wvag, th)
    rhs = charfn.ouwvag_stationary_psi(ouwvag.wvag, c * th) + charfn.ouwvag_zstar_psi(ouwvag, c * th)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_mixture_probabilities_match_marginal_no_jump_odds(wvagou):
    p, p1, p2, p0 = charfn.mixture_probabilities(wvagou)
    L = wvagou.lam * wvagou.delta
    al = wvagou.wvag.alpha
    # coordinate k stays on its line iff nothing moved it: atom or only the other axis jumped
    assert p + p2 == pytest.approx(np.exp(-2 * L / al[0]), rel=1e-12)
    assert p + p1 == pytest.approx(np.exp(-2 * L / al[1]), rel=1e-12)
    assert p + p1 + p2 + p0 == pytest.approx(1.0)
    assert (p, p1, p2, p0) == pytest.approx((0.121103, 0.014232, 0.208090, 0.656575), abs=1e-6)


def test_mixture_components_reassemble_innovation_cf(wvagou):
    th = theta_square(6.0, 9)
    p, p1, p2, p0 = charfn.mixture_probabilities(wvagou)
    mix = (p + p1 * charfn.mixture_component_cf(wvagou, 1, th[:, 0])
           + p2 * charfn.mixture_component_cf(wvagou, 2, th[:, 1])
           + p0 * charfn.mixture_component_cf(wvagou, 0, th))
    want = np.exp(charfn.wvagou_zstar_psi(wvagou, th) - 1j * th @ wvagou.zeta)
    np.testing.assert_allclose(mix, want, atol=1e-12)
    for which, t in ((1, 0.0), (2, 0.0), (0, np.zeros(2))):
        assert charfn.mixture_component_cf(wvagou, which, t) == pytest.approx(1.0)


def test_mixture_needs_two_dimensions():
    w = WvagParams(1.0, [0.9], [0.0], [[0.2]], [0.0])
    with pytest.raises(DimensionUnsupportedError):
        charfn.mixture_probabilities(LdoupModel(ModelKind.WVAG_OU, 0.5, w, 1.0))


def test_quadrature_budget_exhaustion_raises():
    quad = QuadratureSpec(nodes=16, max_nodes=64)

    def wiggly(th):
        return np.expm1(1j * th[..., 0])

    with pytest.raises(QuadratureNotConvergedError):
        charfn.ou_zstar_psi(wiggly, 2.5, 2.0, np.array([[10.0, 0.0]]), quad)


def test_zero_frequency_gives_zero(ouwvag, wvagou):
    z = np.zeros((1, 2))
    for m in (ouwvag, wvagou):
        assert abs(charfn.zstar_psi(m, z)[0]) < 1e-14
        assert abs(charfn.stationary_psi(m, z)[0]) < 1e-14
