"""Log-likelihoods of equally spaced observations of the two OU families."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from . import charfn
from .charfn import DEFAULT_QUAD, QuadratureSpec
from .errors import DimensionUnsupportedError
from .fourier import EPS_FLOOR, DensityGrid, FourierSpec, density_at, invert_cf
from .moments import stationary_cov, stationary_mean, zstar_moments
from .params import LdoupModel, ModelKind, ObservationSet, WvagParams


def atom_tolerance(zeta):
    return 1e-9 * (1.0 + np.abs(zeta))


@dataclass(frozen=True)
class LogLik:
    value: float
    n_atom_hits: int = 0
    n_axis_hits: tuple = (0, 0)
    n_floor_hits: int = 0

    def __float__(self):
        return self.value


# -- grid geometry ----------------------------------------------------------


def stationary_spec(model: LdoupModel, n_points=None, scale=None) -> FourierSpec:
    """Grid for the stationary density, sized by the stationary variance."""
    return FourierSpec.from_moments(stationary_mean(model), np.diag(stationary_cov(model)),
                                    n_points, scale)


def innovation_spec(model: LdoupModel, n_points=None, scale=None) -> FourierSpec:
    """Grid for the innovation density, centred at its mean."""
    mom = zstar_moments(model)
    return FourierSpec.from_moments(mom.m1, mom.m2, n_points, scale)


class MixtureGrids(NamedTuple):
    f1: FourierSpec
    f2: FourierSpec
    f0: FourierSpec


def mixture_grids(model: LdoupModel, n_points_1d=None, n_points_2d=None) -> MixtureGrids:
    """Default grids for the three jump components, centred on the atom."""
    m2 = zstar_moments(model).m2
    f1 = FourierSpec.from_moments([0.0], [m2[0]], n_points_1d)
    f2 = FourierSpec.from_moments([0.0], [m2[1]], n_points_1d)
    f0 = FourierSpec.from_moments([0.0, 0.0], m2, n_points_2d)
    return MixtureGrids(f1, f2, f0)


# -- densities ----------------------------------------------------------------


def stationary_density(model: LdoupModel, layout: FourierSpec | None = None,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> DensityGrid:
    layout = layout or stationary_spec(model)
    if model.kind is ModelKind.WVAG_OU:
        # symmetric about eta: invert the real CF of Y - eta on a grid centred there
        layout = FourierSpec(layout.n_points, layout.spacing, tuple(model.wvag.eta))
        w0 = model.wvag.replace(eta=np.zeros(model.n))
        return invert_cf(lambda th: np.exp(charfn.wvag_psi(w0, th).real), layout, centred=True)
    return invert_cf(lambda th: np.exp(charfn.stationary_psi(model, th, quad)), layout)


def innovation_density(model: LdoupModel, layout: FourierSpec | None = None,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> DensityGrid:
    """Density of the innovation of an OU-WVAG model (absolutely continuous)."""
    if model.kind is ModelKind.WVAG_OU:
        raise ValueError("the WVAG-OU innovation has atoms; use build_mixture")
    layout = layout or innovation_spec(model)
    return invert_cf(lambda th: np.exp(charfn.ouwvag_zstar_psi(model, th, quad)), layout)


@dataclass(frozen=True, eq=False)
class InnovationMixture:
    """WVAG-OU innovation as atom + two axis densities + plane density."""

    zeta: np.ndarray
    p: float
    p1: float
    p2: float
    p0: float
    f1: DensityGrid
    f2: DensityGrid
    f0: DensityGrid

    @property
    def probabilities(self):
        return self.p, self.p1, self.p2, self.p0

    def total_mass(self) -> float:
        """Mass against the dominating measure, by trapezoid integration."""
        m1 = trapezoid(self.f1.values, dx=self.f1.layout.spacing[0])
        m2 = trapezoid(self.f2.values, dx=self.f2.layout.spacing[0])
        h = self.f0.layout.spacing
        m0 = trapezoid(trapezoid(self.f0.values, dx=h[1], axis=1), dx=h[0])
        return float(self.p + self.p1 * m1 + self.p2 * m2 + self.p0 * m0)


def build_mixture(model: LdoupModel, grids: MixtureGrids | None = None) -> InnovationMixture:
    if model.n != 2:
        raise DimensionUnsupportedError("the innovation mixture is defined for n = 2")
    model.check(require_invertible=True)
    grids = grids or mixture_grids(model)
    p, p1, p2, p0 = charfn.mixture_probabilities(model)
    f1 = invert_cf(lambda th: charfn.mixture_component_cf(model, 1, th), grids.f1)
    f2 = invert_cf(lambda th: charfn.mixture_component_cf(model, 2, th), grids.f2)
    f0 = invert_cf(lambda th: charfn.mixture_component_cf(model, 0, th), grids.f0)
    return InnovationMixture(model.zeta, p, p1, p2, p0, f1, f2, f0)


def _log_density(grid, x):
    d = density_at(grid, x)
    return np.log(d), int(np.count_nonzero(d <= EPS_FLOOR))


def classify(innov, zeta):
    """Branch per innovation: 3 atom, 1/2 only that axis moved, 0 plane."""
    off = np.abs(innov - zeta) > atom_tolerance(zeta)
    branch = np.zeros(len(innov), dtype=int)
    branch[~off[:, 0] & ~off[:, 1]] = 3
    branch[off[:, 0] & ~off[:, 1]] = 1
    branch[~off[:, 0] & off[:, 1]] = 2
    return branch


def wvagou_loglik(model: LdoupModel, obs: ObservationSet, mix: InnovationMixture,
                  stat_density: DensityGrid) -> LogLik:
    """Log-likelihood of WVAG-OU observations with lambda and eta treated as known."""
    if obs.n != 2:
        raise DimensionUnsupportedError("the mixture likelihood is defined for n = 2")
    total, floors = _log_density(stat_density, obs.data[0])
    total = float(total)
    z = obs.innovations(model.lam)
    d = z - mix.zeta
    branch = classify(z, mix.zeta)
    counts = np.bincount(branch, minlength=4)
    total += counts[3] * np.log(mix.p)
    for b, prob, grid, sel in ((1, mix.p1, mix.f1, 0), (2, mix.p2, mix.f2, 1)):
        if counts[b]:
            ld, fl = _log_density(grid, d[branch == b, sel])
            total += counts[b] * np.log(prob) + ld.sum()
            floors += fl
    if counts[0]:
        ld, fl = _log_density(mix.f0, d[branch == 0])
        total += counts[0] * np.log(mix.p0) + ld.sum()
        floors += fl
    return LogLik(float(total), int(counts[3]), (int(counts[1]), int(counts[2])), floors)


def marginal_model(lam, eta_k, alpha_k, sigma_kk, delta, mu_k=0.0, kind=ModelKind.WVAG_OU):
    """One-dimensional model whose stationary law (or driver) is VG(1/alpha_k)."""
    # in one dimension only a + beta = 1/alpha matters; split it evenly
    w = WvagParams(0.5 / alpha_k, [alpha_k], [mu_k], [[sigma_kk]], [eta_k])
    return LdoupModel(kind, lam, w, delta)


def marginal_vgou_loglik(lam, eta_k, alpha_k, sigma_kk, obs_k: ObservationSet,
                         fspec: FourierSpec | None = None,
                         stat_spec: FourierSpec | None = None) -> LogLik:
    """Log-likelihood of one coordinate of a WVAG-OU model (a VG-OU process).

    The innovation is an atom at ``zeta_k`` with probability
    ``exp(-2 lam delta / alpha_k)`` plus an absolutely continuous part.
    """
    delta = obs_k.delta
    L = lam * delta
    x = obs_k.data[:, 0]
    model = marginal_model(lam, eta_k, alpha_k, sigma_kk, delta)
    p = np.exp(-2 * L / alpha_k)
    zeta = eta_k * np.expm1(L)
    c = alpha_k * sigma_kk
    grow = np.exp(2 * L)

    def cont_cf(th):
        q = c * th[..., 0] ** 2
        ratio = np.log1p(0.5 * q * grow) - np.log1p(0.5 * q)
        return (np.exp(-ratio / alpha_k) - p) / (1 - p)

    m2 = zstar_moments(model).m2
    fspec = fspec or FourierSpec.from_moments([0.0], m2)
    f = invert_cf(cont_cf, fspec)
    stat = stationary_density(model, stat_spec)
    total, floors = _log_density(stat, x[:1])
    total = float(np.sum(total))
    z = np.exp(L) * x[1:] - x[:-1]
    hit = np.abs(z - zeta) <= atom_tolerance(zeta)
    nh = int(hit.sum())
    total += nh * np.log(p)
    if nh < len(z):
        ld, fl = _log_density(f, z[~hit] - zeta)
        total += (len(z) - nh) * np.log1p(-p) + ld.sum()
        floors += fl
    return LogLik(float(total), nh, (0, 0), floors)


def generic_loglik(model: LdoupModel, obs: ObservationSet, innov_density: DensityGrid,
                   stat_density: DensityGrid) -> LogLik:
    """Log-likelihood with an absolutely continuous innovation.

    Includes the Jacobian ``m n lam delta`` of the map from innovations to
    observations.
    """
    ld0, floors = _log_density(stat_density, obs.data[0])
    total = float(np.sum(ld0))
    if obs.m:
        z = obs.innovations(model.lam)
        ld, fl = _log_density(innov_density, z if obs.n > 1 else z[:, 0])
        total += ld.sum() + obs.m * obs.n * model.lam * obs.delta
        floors += fl
    return LogLik(float(total), 0, (0, 0), floors)
