"""Characteristic exponents of WVAG laws and of the OU quantities built on them.

All functions are vectorised: ``theta`` has shape ``(..., n)`` and the result
has shape ``(...)``.  For one-dimensional laws a trailing axis of length one
may be omitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionUnsupportedError, QuadratureNotConvergedError
from .params import LdoupModel, ModelKind, WvagParams


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre settings with adaptive node doubling.

    ``nodes`` is the starting rule size, doubled until two successive rules
    agree to ``rtol`` (relative to ``max(1, |value|)``).  ``tail_tol`` fixes
    the truncation point of the infinite stationary integral through
    ``exp(-t_max) * max|theta| <= tail_tol``.
    """

    nodes: int = 16
    max_nodes: int = 4096
    rtol: float = 1e-9
    tail_tol: float = 1e-8
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if self.nodes < 16:
            raise ValueError("at least 16 quadrature nodes are required")
        if self.rule != "gauss-legendre":
            raise ValueError(f"unsupported rule {self.rule!r}")


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=32)
def _gl01(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _clog(re, im):
    # Principal log from real and imaginary parts.  Every call site has
    # re >= 1 (a one plus a nonnegative quadratic), so the argument stays in
    # the right half-plane and no branch cut is crossed.
    return 0.5 * np.log(re * re + im * im) + 1j * np.arctan(im / re)


def _theta(theta, n):
    th = np.asarray(theta, dtype=float)
    if n == 1 and (th.ndim == 0 or th.shape[-1] != 1):
        th = th[..., None]
    if th.shape[-1] != n:
        raise ValueError(f"theta must have trailing dimension {n}")
    return th


def _quad_form(th, A):
    # explicit sum over entries: much faster than a reduction over a short last axis
    n = A.shape[0]
    q = 0.0
    for i in range(n):
        ti = th[..., i]
        q = q + A[i, i] * ti * ti
        for j in range(i + 1, n):
            q = q + (2.0 * A[i, j]) * ti * th[..., j]
    return q


def _dot(th, v):
    out = 0.0
    for i, vi in enumerate(v):
        if vi != 0:
            out = out + vi * th[..., i]
    return out + np.zeros(th.shape[:-1])


def _per_axis(fn, x):
    """Apply an elementwise function of one frequency coordinate.

    On a rectangular frequency grid that coordinate is constant along one
    axis, so the function is evaluated on N values and broadcast instead of
    on all N^2.
    """
    if x.ndim == 2 and x.size >= 4096:
        if np.array_equal(x, np.broadcast_to(x[:, :1], x.shape)):
            return np.broadcast_to(fn(x[:, :1]), x.shape)
        if np.array_equal(x, np.broadcast_to(x[:1, :], x.shape)):
            return np.broadcast_to(fn(x[:1, :]), x.shape)
    return fn(x)


def _structure(params: WvagParams, th):
    """Linear and quadratic forms entering the WVAG exponent.

    Returns ``(u0, q0, [(beta_k, u_k, q_k), ...])`` with ``u`` the drift term
    and ``q`` the variance term of each log factor.
    """
    u0 = _dot(th, params.alpha_mu)
    q0 = _quad_form(th, params.alpha_sigma)
    axes = []
    for k, bk in enumerate(params.betas):
        axes.append((bk, params.alpha[k] * params.mu[k], params.alpha[k] * params.Sigma[k, k], th[..., k]))
    return u0, q0, axes


def _logfactor(u, q):
    """``log(1 - i u + q/2)`` with ``q >= 0``."""
    if np.all(u == 0):
        return np.log1p(0.5 * q) + 0j
    return _clog(1.0 + 0.5 * q, -u)


def wvag_psi(params: WvagParams, theta) -> np.ndarray:
    """Characteristic exponent of a WVAG law at unit time."""
    th = _theta(theta, params.n)
    u0, q0, axes = _structure(params, th)
    out = 1j * _dot(th, params.eta) - params.a * _logfactor(u0, q0)
    for bk, amk, ask, tk in axes:
        out = out - bk * _per_axis(lambda t: _logfactor(amk * t, ask * t * t), tk)
    return out


def vg_psi(b, mu, sigma2, theta) -> np.ndarray:
    """Exponent of a variance gamma law with gamma rate and shape ``b``.

    ``mu`` and ``sigma2`` may be a scalar pair or an n-vector and an n x n
    covariance, in which case ``theta`` has a trailing axis of length n.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 0:
        th = np.asarray(theta, dtype=float)
        u, q = mu * th, sigma2 * th * th
    else:
        th = _theta(theta, mu.shape[0])
        u, q = th @ mu, _quad_form(th, np.atleast_2d(sigma2))
    return -b * _clog(1.0 + 0.5 * q / b, -u / b)


def wvagou_bdlp_psi(model: LdoupModel, theta) -> np.ndarray:
    """Exponent of the driving process of a WVAG-OU model (rational form)."""
    w = model.wvag
    th = _theta(theta, w.n)
    _, q0, axes = _structure(w, th)
    out = 1j * _dot(th, w.eta) - w.a * q0 / (1.0 + 0.5 * q0)
    for bk, _, ask, tk in axes:
        qk = ask * tk * tk
        out = out - bk * qk / (1.0 + 0.5 * qk)
    return out


def wvagou_zstar_psi(model: LdoupModel, theta) -> np.ndarray:
    """Closed-form exponent of the one-step innovation of a WVAG-OU model."""
    w = model.wvag
    th = _theta(theta, w.n)
    L = model.lam * model.delta
    grow = np.exp(2.0 * L)
    _, q0, axes = _structure(w, th)

    def logratio(q):
        return np.log1p(0.5 * q * grow) - np.log1p(0.5 * q)

    out = 1j * _dot(th, w.eta) * np.expm1(L) - w.a * logratio(q0)
    for bk, _, ask, tk in axes:
        out = out - bk * _per_axis(lambda t: logratio(ask * t * t), tk)
    return out


def mixture_probabilities(model: LdoupModel):
    """Probabilities ``(p, p1, p2, p0)`` of the four parts of the innovation.

    ``p`` is the atom (no jumps at all), ``p1``/``p2`` the two axes (only
    that coordinate's idiosyncratic clock jumped) and ``p0`` the rest.
    """
    if model.n != 2:
        raise DimensionUnsupportedError("the innovation mixture is defined for n = 2")
    L = model.lam * model.delta
    b1, b2 = model.wvag.betas
    e0 = np.exp(-2 * model.wvag.a * L)
    e1, e2 = np.exp(-2 * b1 * L), np.exp(-2 * b2 * L)
    p = e0 * e1 * e2
    p1 = e0 * -np.expm1(-2 * b1 * L) * e2
    p2 = e0 * e1 * -np.expm1(-2 * b2 * L)
    p0 = 1.0 - p - p1 - p2
    return float(p), float(p1), float(p2), float(max(p0, 0.0))


def mixture_component_cf(model: LdoupModel, which: int, theta) -> np.ndarray:
    """Characteristic function of mixture component ``which`` in {1, 2, 0}.

    Components 1 and 2 are scalar laws (``theta`` is a scalar frequency);
    component 0 is bivariate.  All three are real because the WVAG-OU
    innovation is symmetric about its atom.
    """
    if model.n != 2:
        raise DimensionUnsupportedError("the innovation mixture is defined for n = 2")
    w = model.wvag
    L = model.lam * model.delta
    grow = np.exp(2.0 * L)

    def axis_cf(k, t):
        c = w.alpha[k] * w.Sigma[k, k]
        bk = w.betas[k]
        q = c * np.asarray(t, dtype=float) ** 2
        ratio = np.log1p(0.5 * q * grow) - np.log1p(0.5 * q)
        floor = np.exp(-2 * bk * L)
        return (np.exp(-bk * ratio) - floor) / -np.expm1(-2 * bk * L)

    if which in (1, 2):
        t = np.asarray(theta, dtype=float)
        if t.ndim and t.shape[-1] == 1:
            t = t[..., 0]
        return _per_axis(lambda s: axis_cf(which - 1, s), t)
    if which != 0:
        raise ValueError("which must be 1, 2 or 0")
    th = _theta(theta, 2)
    p, p1, p2, p0 = mixture_probabilities(model)
    # e^{-i theta.zeta} Phi_{Z*}: the drift term of the exponent is exactly i theta.zeta
    centred = np.exp(wvagou_zstar_psi(model, th).real)
    phi1 = _per_axis(lambda s: axis_cf(0, s), th[..., 0])
    phi2 = _per_axis(lambda s: axis_cf(1, s), th[..., 1])
    return (centred - p - p1 * phi1 - p2 * phi2) / p0


# ---------------------------------------------------------------------------
# Quadrature-based exponents


def _probe_index(key, limit=512):
    key = np.abs(np.ravel(key))
    if key.size <= limit:
        return slice(None)
    top = np.argpartition(key, -64)[-64:]
    spread = np.linspace(0, key.size - 1, limit - 64).astype(np.intp)
    return np.unique(np.concatenate([top, spread]))


def _adaptive(evaluate, quad: QuadratureSpec, probe):
    """Pick a node count by doubling on ``probe``; return it with the probe values.

    ``evaluate(n, index)`` integrates with an n-node rule at the flattened
    points ``index``.
    """
    n = quad.nodes
    prev = evaluate(n, probe)
    while True:
        cur = evaluate(2 * n, probe)
        diff = np.max(np.abs(cur - prev)) if np.size(cur) else 0.0
        scale = max(1.0, np.max(np.abs(cur)) if np.size(cur) else 0.0)
        if diff <= quad.rtol * scale:
            return n, diff
        n *= 2
        if 2 * n > quad.max_nodes:
            if diff <= 1e-8 * scale:
                return n, diff
            raise QuadratureNotConvergedError(
                f"node doubling still changes the integral by {diff:.3g} at {n} nodes")
        prev = cur


def _integrate_rule(fn, theta_flat, lo, hi, n):
    """Sum of ``w_j fn(t_j, theta)`` over an n-node rule on [lo, hi]."""
    x, w = _gl01(n)
    span = hi - lo
    acc = 0.0
    for xj, wj in zip(x, w):
        acc = acc + (wj * span) * fn(lo + span * xj, theta_flat)
    return acc


def ou_zstar_psi(bdlp_psi, lam, delta, theta, quad: QuadratureSpec = DEFAULT_QUAD,
                 return_info=False):
    """Innovation exponent as the integral of the driving exponent over [0, lam*delta].

    ``bdlp_psi`` maps an array of frequencies ``(..., n)`` to exponents.
    """
    th = np.asarray(theta, dtype=float)
    lead = th.shape[:-1] if th.ndim > 1 else th.shape
    flat = th.reshape(-1, th.shape[-1]) if th.ndim > 1 else th.reshape(-1)
    L = lam * delta
    if L == 0:
        out = np.zeros(lead, dtype=complex)
        return (out, {"nodes": 0}) if return_info else out

    def integrand(t, x):
        return bdlp_psi(np.exp(t) * x)

    def evaluate(n, idx):
        return _integrate_rule(integrand, flat[idx], 0.0, L, n)

    norms = np.abs(flat) if flat.ndim == 1 else np.linalg.norm(flat, axis=-1)
    n, err = _adaptive(evaluate, quad, _probe_index(norms))
    out = np.asarray(evaluate(n, slice(None)), dtype=complex).reshape(lead)
    return (out, {"nodes": n, "change": err}) if return_info else out


def ou_stationary_psi(bdlp_psi, theta, quad: QuadratureSpec = DEFAULT_QUAD, return_info=False):
    """Stationary exponent as the integral of ``bdlp_psi(e^{-t} theta)`` over t > 0.

    The integral is truncated at ``t_max`` with ``exp(-t_max) max|theta| =
    tail_tol``; the remainder is approximated by ``bdlp_psi(e^{-t_max} theta)``,
    which is the exact tail of the linear part of the exponent near zero.
    """
    th = np.asarray(theta, dtype=float)
    lead = th.shape[:-1] if th.ndim > 1 else th.shape
    flat = th.reshape(-1, th.shape[-1]) if th.ndim > 1 else th.reshape(-1)
    norms = np.abs(flat) if flat.ndim == 1 else np.linalg.norm(flat, axis=-1)
    top = float(norms.max()) if norms.size else 0.0
    if top == 0.0:
        out = np.zeros(lead, dtype=complex)
        return (out, {"nodes": 0, "t_max": 0.0}) if return_info else out
    t_max = max(np.log(top / quad.tail_tol), 1.0)

    def integrand(t, x):
        return bdlp_psi(np.exp(-t) * x)

    def evaluate(n, idx):
        x = flat[idx]
        return _integrate_rule(integrand, x, 0.0, t_max, n) + bdlp_psi(np.exp(-t_max) * x)

    n, err = _adaptive(evaluate, quad, _probe_index(norms))
    out = np.asarray(evaluate(n, slice(None)), dtype=complex).reshape(lead)
    tail = float(np.max(np.abs(bdlp_psi(np.exp(-t_max) * flat[_probe_index(norms)]))))
    info = {"nodes": n, "change": err, "t_max": t_max, "tail": tail}
    return (out, info) if return_info else out


# Structured versions for a WVAG driving process.  Every term of the WVAG
# exponent is a scalar function of a drift form u and a variance form q, so
# each log factor is integrated once per point instead of once per node of
# the full n-dimensional exponent.


def _h_integral(kappa, c, n):
    """``int_0^c log(1 - i kappa y + y^2) / y dy`` with an n-node rule."""
    x, w = _gl01(n)
    acc = np.zeros(np.broadcast(kappa, c).shape, dtype=complex)
    for xj, wj in zip(x, w):
        y = c * xj
        acc += (wj / xj) * _clog(1.0 + y * y, -kappa * y)
    return acc


def _stationary_term(u, q, quad):
    """``int_0^inf log(1 - i u e^{-t} + q e^{-2t} / 2) dt`` for arrays u, q >= 0.

    Substituting ``r = e^{-t} sqrt(q/2)`` turns the integral into
    ``int_0^R log(1 - i kappa r + r^2) dr / r`` with ``R = sqrt(q/2)`` and
    ``kappa = u / R``.  For ``R > 1`` the part beyond one is folded back with
    ``r -> 1/r``, leaving integrals over subsets of [0, 1] plus ``log(R)^2``.
    No truncation is involved.
    """
    u = np.asarray(u, dtype=float)
    q = np.asarray(q, dtype=float)
    R = np.sqrt(0.5 * q)
    live = R > 0
    safe_R = np.where(live, R, 1.0)
    kappa = np.where(live, u / safe_R, 0.0)
    big = safe_R > 1.0
    c = np.where(big, 1.0 / safe_R, safe_R)

    def evaluate(n, idx):
        k, cc, b = kappa.ravel()[idx], c.ravel()[idx], big.ravel()[idx]
        h = _h_integral(k, cc, n)
        h1 = _h_integral(k[b], 1.0, n)
        h[b] = 2.0 * h1 - h[b]
        return h

    probe = _probe_index(kappa)
    n, _ = _adaptive(evaluate, quad, probe)
    out = evaluate(n, slice(None)).reshape(u.shape)
    out = np.where(big, out + np.log(safe_R) ** 2, out)
    return np.where(live, out, 0.0)


def _zstar_term(u, q, L, quad):
    """``int_0^L log(1 - i u e^t + q e^{2t} / 2) dt``."""
    u = np.asarray(u, dtype=float)
    q = np.asarray(q, dtype=float)
    uf, qf = u.ravel(), q.ravel()

    def evaluate(n, idx):
        x, w = _gl01(n)
        uu, qq = uf[idx], qf[idx]
        acc = np.zeros(uu.shape, dtype=complex)
        for xj, wj in zip(x, w):
            s = np.exp(L * xj)
            acc += (wj * L) * _logfactor(uu * s, qq * s * s)
        return acc

    n, _ = _adaptive(evaluate, quad, _probe_index(np.abs(uf) + np.sqrt(qf)))
    return evaluate(n, slice(None)).reshape(u.shape)


def ouwvag_stationary_psi(params: WvagParams, theta, quad: QuadratureSpec = DEFAULT_QUAD):
    """Stationary exponent of an OU process driven by a WVAG process."""
    th = _theta(theta, params.n)
    u0, q0, axes = _structure(params, th)
    out = 1j * _dot(th, params.eta) - params.a * _stationary_term(u0, q0, quad)
    for bk, amk, ask, tk in axes:
        out = out - bk * _per_axis(lambda t: _stationary_term(amk * t, ask * t * t, quad), tk)
    return out


def ouwvag_zstar_psi(model: LdoupModel, theta, quad: QuadratureSpec = DEFAULT_QUAD):
    """Innovation exponent of an OU process driven by a WVAG process."""
    w = model.wvag
    th = _theta(theta, w.n)
    L = model.lam * model.delta
    u0, q0, axes = _structure(w, th)
    out = 1j * _dot(th, w.eta) * np.expm1(L) - w.a * _zstar_term(u0, q0, L, quad)
    for bk, amk, ask, tk in axes:
        out = out - bk * _per_axis(lambda t: _zstar_term(amk * t, ask * t * t, L, quad), tk)
    return out


def stationary_psi(model: LdoupModel, theta, quad: QuadratureSpec = DEFAULT_QUAD):
    """Exponent of the stationary law of either model family."""
    if model.kind is ModelKind.WVAG_OU:
        return wvag_psi(model.wvag, theta)
    return ouwvag_stationary_psi(model.wvag, theta, quad)


def zstar_psi(model: LdoupModel, theta, quad: QuadratureSpec = DEFAULT_QUAD):
    """Exponent of the one-step innovation of either model family."""
    if model.kind is ModelKind.WVAG_OU:
        return wvagou_zstar_psi(model, theta)
    return ouwvag_zstar_psi(model, theta, quad)


def bdlp_psi(model: LdoupModel):
    """Driving-process exponent as a callable of theta."""
    if model.kind is ModelKind.WVAG_OU:
        return lambda th: wvagou_bdlp_psi(model, th)
    return lambda th: wvag_psi(model.wvag, th)
