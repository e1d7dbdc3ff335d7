"""Closed-form moments of the innovation and of the stationary law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import LdoupModel, ModelKind, WvagParams


@dataclass(frozen=True, eq=False)
class MomentSet:
    """Per-coordinate mean (``m1``) and central moments ``m2..m4``."""

    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray
    cross_cov: np.ndarray
    gamma: np.ndarray

    def rows(self):
        """Flattened ``(label, value)`` pairs in reporting order."""
        out = []
        for k in range(len(self.m1)):
            for j, m in enumerate((self.m1, self.m2, self.m3, self.m4), start=1):
                out.append((f"m{j}(Z{k + 1})", float(m[k])))
        for k in range(len(self.m1)):
            for l in range(k + 1, len(self.m1)):
                out.append((f"cov(Z{k + 1},Z{l + 1})", float(self.cross_cov[k, l])))
        return out


def gammas(lam, delta) -> np.ndarray:
    """``(e^{k lam delta} - 1) / k`` for k = 1..4."""
    k = np.arange(1, 5)
    return np.expm1(k * lam * delta) / k


def wvag_cumulants(params: WvagParams):
    """Unit-time cumulants of a WVAG law.

    Returns ``(k1, k2, k3, k4, cov)``: per-coordinate cumulant vectors and the
    covariance matrix.  Each coordinate is VG with gamma shape ``1/alpha_k``;
    the covariance comes from the shared clock only.
    """
    al, mu, S = params.alpha, params.mu, np.diag(params.Sigma)
    k1 = params.eta + mu
    k2 = S + al * mu**2
    k3 = 2 * al**2 * mu**3 + 3 * al * S * mu
    k4 = 3 * al * S**2 + 12 * al**2 * S * mu**2 + 6 * al**3 * mu**4
    cov = params.a * (params.alpha_sigma + np.outer(al * mu, al * mu))
    cov[np.diag_indices_from(cov)] = k2
    return k1, k2, k3, k4, cov


def zstar_moments_wvagou(model: LdoupModel) -> MomentSet:
    w = model.wvag
    g = gammas(model.lam, model.delta)
    S = np.diag(w.Sigma)
    m2 = 2 * g[1] * S
    m4 = 12 * S**2 * (g[3] * (w.alpha + 1) - g[1])
    cov = 2 * g[1] * w.alpha_sigma
    cov[np.diag_indices_from(cov)] = m2
    return MomentSet(g[0] * w.eta, m2, np.zeros_like(m2), m4, cov, g)


def zstar_moments_ouwvag(model: LdoupModel) -> MomentSet:
    g = gammas(model.lam, model.delta)
    k1, k2, k3, k4, cov = wvag_cumulants(model.wvag)
    # Cumulants of the innovation are gamma_j times those of the driver at unit time.
    m4 = g[3] * k4 + 3 * (g[1] * k2) ** 2
    return MomentSet(g[0] * k1, g[1] * k2, g[2] * k3, m4, g[1] * cov, g)


def zstar_moments(model: LdoupModel) -> MomentSet:
    if model.kind is ModelKind.WVAG_OU:
        return zstar_moments_wvagou(model)
    return zstar_moments_ouwvag(model)


def stationary_mean(model: LdoupModel) -> np.ndarray:
    # E[Y] = E[W(1)] for WVAG-OU and E[Z(1)] for OU-WVAG; both equal eta + mu.
    return model.wvag.eta + model.wvag.mu


def stationary_cov(model: LdoupModel) -> np.ndarray:
    """Covariance matrix of the stationary law.

    Off the diagonal this is ``a((alpha_k ^ alpha_l) Sigma_kl + alpha_k alpha_l mu_k mu_l)``,
    halved for the OU-WVAG family.  The diagonal holds the marginal
    variances ``Sigma_kk + alpha_k mu_k^2`` (also halved for OU-WVAG).
    """
    _, k2, _, _, cov = wvag_cumulants(model.wvag)
    if model.kind is ModelKind.OU_WVAG:
        cov = cov / 2
    return cov


def stationary_variance(model: LdoupModel) -> np.ndarray:
    return np.diag(stationary_cov(model)).copy()


def acf(model_or_lam, t):
    """Autocorrelation ``exp(-lam t)`` shared by every coordinate."""
    lam = model_or_lam.lam if isinstance(model_or_lam, LdoupModel) else float(model_or_lam)
    return np.exp(-lam * np.abs(np.asarray(t, dtype=float)))
