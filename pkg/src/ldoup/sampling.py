"""Random generation of VG/WVAG laws, OU innovations and observation paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import StepTooCoarseError
from .params import LdoupModel, ModelKind, WvagParams, write_path_csv

EXACT = "exact"
EULER = "euler"
DEFAULT_EULER_STEP = 1e-4


def make_rng(seed=None, replicate=None) -> np.random.Generator:
    """Generator for ``seed``; replicate streams are independent children."""
    if isinstance(seed, np.random.Generator):
        return seed
    if replicate is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replicate)]))


def _psd_root(S):
    """Matrix ``L`` with ``L @ L.T == S`` for a symmetric PSD ``S``."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    ev, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(ev, 0.0, None))


def _shape(size):
    if size is None:
        return ()
    return (size,) if np.isscalar(size) else tuple(size)


def _count(shape):
    return int(np.prod(shape)) if shape else 1


def sample_vg(b, mu, Sigma, t, rng, size=None):
    """Draw VG(b, mu, Sigma) at time ``t``: Brownian motion run on a gamma clock.

    The clock is Gamma(shape b*t, rate b), so it has mean ``t``.
    """
    shape = _shape(size)
    k = _count(shape)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    root = _psd_root(Sigma)
    G = rng.gamma(b * t, 1.0 / b, size=k) if t > 0 else np.zeros(k)
    eps = rng.standard_normal((k, mu.shape[0]))
    x = G[:, None] * mu + np.sqrt(G)[:, None] * (eps @ root.T)
    return x.reshape(shape + mu.shape) if shape else x[0]


def sample_wvag(params: WvagParams, t, rng, size=None):
    """Draw a WVAG vector at time ``t``.

    Sum of the drift, one n-dimensional VG on the shared clock and n scalar
    VG variables on the idiosyncratic clocks.
    """
    shape = _shape(size)
    k = _count(shape)
    n = params.n
    out = np.tile(params.eta * t, (k, 1))
    if t > 0:
        G0 = rng.gamma(params.a * t, 1.0, size=k)
        eps = rng.standard_normal((k, n))
        out += G0[:, None] * params.alpha_mu + np.sqrt(G0)[:, None] * (eps @ _psd_root(params.alpha_sigma).T)
        for j, bj in enumerate(params.betas):
            Gj = rng.gamma(bj * t, params.alpha[j], size=k)
            out[:, j] += params.mu[j] * Gj + np.sqrt(params.Sigma[j, j] * Gj) * rng.standard_normal(k)
    return out.reshape(shape + (n,)) if shape else out[0]


@dataclass(frozen=True, eq=False)
class InnovationDraw:
    """Innovation samples with their jump counts.

    ``counts[:, 0]`` counts jumps of the shared clock, ``counts[:, k]`` those
    of coordinate k's own clock.
    """

    values: np.ndarray
    counts: np.ndarray

    @property
    def atom_flags(self) -> np.ndarray:
        return self.counts == 0

    @property
    def atom(self) -> np.ndarray:
        return np.all(self.counts == 0, axis=-1)


def sample_wvagou_innovation(model: LdoupModel, rng, size=None) -> InnovationDraw:
    """Exact draw of the one-step innovation of a WVAG-OU model.

    Compound Poisson representation: jumps of the shared part arrive at rate
    ``2a`` with bivariate Laplace-type marks, coordinate k's own jumps at rate
    ``2 beta_k``.  A jump arriving at time ``T`` in ``[0, lam*delta]`` is
    scaled by ``e^T``.  Only the multiset of arrival times matters for the
    sum, so iid uniforms stand in for the sorted order statistics.
    """
    shape = _shape(size)
    k = _count(shape)
    w = model.wvag
    n = w.n
    L = model.lam * model.delta
    rates = 2 * L * np.concatenate([[w.a], w.betas])
    counts = rng.poisson(rates, size=(k, n + 1))
    out = np.zeros((k, n))

    tot = counts[:, 0].sum()
    if tot:
        owner = np.repeat(np.arange(k), counts[:, 0])
        G = rng.standard_exponential(tot)
        jumps = np.sqrt(G)[:, None] * (rng.standard_normal((tot, n)) @ _psd_root(w.alpha_sigma).T)
        jumps *= np.exp(L * rng.random(tot))[:, None]
        for j in range(n):
            out[:, j] += np.bincount(owner, weights=jumps[:, j], minlength=k)
    for j in range(n):
        tot = counts[:, j + 1].sum()
        if tot:
            owner = np.repeat(np.arange(k), counts[:, j + 1])
            G = rng.standard_exponential(tot)
            jump = np.sqrt(G * w.alpha[j] * w.Sigma[j, j]) * rng.standard_normal(tot)
            jump *= np.exp(L * rng.random(tot))
            out[:, j] += np.bincount(owner, weights=jump, minlength=k)
    out += model.zeta
    if not shape:
        return InnovationDraw(out[0], counts[0])
    return InnovationDraw(out.reshape(shape + (n,)), counts.reshape(shape + (n + 1,)))


class WvagDriver:
    """WVAG Lévy process used as a driving process in the Euler scheme.

    Besides plain increments it offers :meth:`weighted_sum`, which draws
    ``sum_l w_l dZ_l`` exactly in law from the gamma clocks: given the clocks,
    the Brownian parts are Gaussian with mean ``mu * sum w G`` and variance
    ``Sigma * sum w^2 G``.
    """

    _CHUNK = 2_000_000

    def __init__(self, params: WvagParams):
        self.params = params
        self._root0 = _psd_root(params.alpha_sigma)

    def __call__(self, dt, rng, size=None):
        return sample_wvag(self.params, dt, rng, size)

    def _clock_sums(self, shape, scale, weights, dt, rng, k):
        s1 = np.empty(k)
        s2 = np.empty(k)
        rows = max(1, self._CHUNK // len(weights))
        w2 = weights * weights
        for i in range(0, k, rows):
            G = rng.gamma(shape * dt, scale, size=(min(rows, k - i), len(weights)))
            s1[i:i + rows] = G @ weights
            s2[i:i + rows] = G @ w2
        return s1, s2

    def weighted_sum(self, weights, dt, rng, size=None):
        p = self.params
        shape = _shape(size)
        k = _count(shape)
        n = p.n
        weights = np.asarray(weights, dtype=float)
        out = np.tile(p.eta * dt * weights.sum(), (k, 1))
        s1, s2 = self._clock_sums(p.a, 1.0, weights, dt, rng, k)
        eps = rng.standard_normal((k, n))
        out += s1[:, None] * p.alpha_mu + np.sqrt(s2)[:, None] * (eps @ self._root0.T)
        for j, bj in enumerate(p.betas):
            s1, s2 = self._clock_sums(bj, p.alpha[j], weights, dt, rng, k)
            out[:, j] += p.mu[j] * s1 + np.sqrt(p.Sigma[j, j] * s2) * rng.standard_normal(k)
        return out.reshape(shape + (n,)) if shape else out[0]


class WvagOuDriver:
    """Compound Poisson driving process of a WVAG-OU model."""

    def __init__(self, model: LdoupModel):
        self.model = model

    def __call__(self, dt, rng, size=None):
        w = self.model.wvag
        shape = _shape(size)
        k = _count(shape)
        n = w.n
        out = np.tile(w.eta * dt, (k, 1))
        counts = rng.poisson(2 * dt * np.concatenate([[w.a], w.betas]), size=(k, n + 1))
        root = _psd_root(w.alpha_sigma)
        for j in range(n + 1):
            tot = counts[:, j].sum()
            if not tot:
                continue
            owner = np.repeat(np.arange(k), counts[:, j])
            G = rng.standard_exponential(tot)
            if j == 0:
                jumps = np.sqrt(G)[:, None] * (rng.standard_normal((tot, n)) @ root.T)
                for c in range(n):
                    out[:, c] += np.bincount(owner, weights=jumps[:, c], minlength=k)
            else:
                jump = np.sqrt(G * w.alpha[j - 1] * w.Sigma[j - 1, j - 1]) * rng.standard_normal(tot)
                out[:, j - 1] += np.bincount(owner, weights=jump, minlength=k)
        return out.reshape(shape + (n,)) if shape else out[0]


def euler_steps(lam, delta, tilde_delta) -> int:
    # the small offset protects against floor(4.999999...) from rounding
    return int(np.floor(lam * delta / tilde_delta + 1e-9))


def sample_euler_innovation(bdlp_sampler, lam, delta, tilde_delta, rng, size=None):
    """Riemann-sum approximation ``sum_{l=1}^{n} e^{l dt} dZ_l`` of the innovation.

    ``bdlp_sampler(dt, rng, size)`` returns driving-process increments over
    ``dt``; samplers that provide ``weighted_sum`` are used through it.
    """
    steps = euler_steps(lam, delta, tilde_delta)
    if steps < 8:
        raise StepTooCoarseError(
            f"lam*delta/tilde_delta gives {steps} Euler steps; at least 8 are needed")
    weights = np.exp(tilde_delta * np.arange(1, steps + 1))
    if hasattr(bdlp_sampler, "weighted_sum"):
        return bdlp_sampler.weighted_sum(weights, tilde_delta, rng, size)
    acc = 0.0
    for wl in weights:
        acc = acc + wl * bdlp_sampler(tilde_delta, rng, size)
    return acc


def driver_for(model: LdoupModel):
    if model.kind is ModelKind.OU_WVAG:
        return WvagDriver(model.wvag)
    return WvagOuDriver(model)


@dataclass(eq=False)
class PathSample:
    """Simulated observations with the metadata needed to regenerate them."""

    data: np.ndarray
    delta: float
    scheme: str
    model: LdoupModel
    euler_step: float | None = None
    seed: int | None = None
    replicate: int | None = None
    innovations: np.ndarray | None = field(default=None, repr=False)
    counts: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.data.shape[0] - 1

    def observations(self):
        from .params import ObservationSet
        return ObservationSet(self.data, self.delta)

    def sidecar(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "m": self.m,
            "delta": self.delta,
            "scheme": self.scheme,
            "euler_step": self.euler_step,
            "seed": self.seed,
            "replicate": self.replicate,
        }

    def save(self, csv_path) -> Path:
        """Write the CSV and a JSON sidecar next to it; returns the sidecar path."""
        csv_path = Path(csv_path)
        write_path_csv(csv_path, self.data, self.delta)
        side = csv_path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(), indent=2))
        return side


def _initial_draws(model, n_paths, rng, stat_grid):
    if model.kind is ModelKind.WVAG_OU:
        # The stationary law is the WVAG law itself (mu = 0).
        return sample_wvag(model.wvag, 1.0, rng, size=n_paths)
    from .fourier import inverse_cdf_sampler
    from .likelihood import stationary_density
    grid = stat_grid if stat_grid is not None else stationary_density(model)
    x = inverse_cdf_sampler(grid)(rng, n_paths)
    return x.reshape(n_paths, model.n)


def draw_innovations(model, count, rng, scheme, euler_step=None):
    """``(values, counts)`` for ``count`` innovations under ``scheme``."""
    if scheme == EXACT:
        if model.kind is not ModelKind.WVAG_OU:
            raise ValueError("the exact scheme is available for WVAG-OU models only")
        d = sample_wvagou_innovation(model, rng, size=count)
        return d.values, d.counts
    step = DEFAULT_EULER_STEP if euler_step is None else euler_step
    z = sample_euler_innovation(driver_for(model), model.lam, model.delta, step, rng, size=count)
    return z, None


def sample_paths(model: LdoupModel, m: int, n_paths: int, rng, scheme=None,
                 euler_step=None, stat_grid=None, return_innovations=False):
    """Simulate ``n_paths`` independent stationary paths, shape ``(n_paths, m+1, n)``."""
    model.check()
    rng = make_rng(rng)
    scheme = scheme or (EXACT if model.kind is ModelKind.WVAG_OU else EULER)
    x0 = _initial_draws(model, n_paths, rng, stat_grid)
    n = model.n
    if m > 0:
        z, counts = draw_innovations(model, m * n_paths, rng, scheme, euler_step)
        z = z.reshape(n_paths, m, n)
        if counts is not None:
            counts = counts.reshape(n_paths, m, n + 1)
    else:
        z = np.zeros((n_paths, 0, n))
        counts = np.zeros((n_paths, 0, n + 1), dtype=int) if scheme == EXACT else None
    c = model.decay
    tail = lfilter([c], [1.0, -c], z, axis=1, zi=(c * x0)[:, None, :])[0] if m > 0 else z
    paths = np.concatenate([x0[:, None, :], tail], axis=1)
    if return_innovations:
        return paths, z, counts
    return paths


def sample_path(model: LdoupModel, m: int, rng=None, scheme=None, euler_step=None,
                stat_grid=None) -> PathSample:
    """One stationary path of ``m`` steps with its innovations."""
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    scheme = scheme or (EXACT if model.kind is ModelKind.WVAG_OU else EULER)
    if scheme == EULER and euler_step is None:
        euler_step = DEFAULT_EULER_STEP
    paths, z, counts = sample_paths(model, m, 1, rng, scheme, euler_step, stat_grid,
                                    return_innovations=True)
    return PathSample(paths[0], model.delta, scheme, model,
                      euler_step=euler_step if scheme == EULER else None, seed=seed,
                      innovations=z[0], counts=None if counts is None else counts[0])
