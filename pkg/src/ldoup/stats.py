"""Goodness-of-fit and dependence diagnostics for simulated paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import DegenerateSeriesError


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int


def ks_test(samples, cdf) -> KsResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    ``scipy.special.kolmogorov`` evaluates the limiting survival function of
    ``sqrt(n) D_n``.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    return KsResult(float(d), float(special.kolmogorov(np.sqrt(n) * d)), n)


@dataclass(frozen=True)
class BootstrapCi:
    point: float
    lo: float
    hi: float
    replicates: int
    level: float

    def covers(self, value) -> bool:
        return self.lo <= value <= self.hi


def bootstrap_cov_ci(x, replicates=10_000, level=0.95, rng=None, block=1) -> BootstrapCi:
    """Percentile bootstrap interval for the covariance of paired data.

    With ``block > 1`` a moving-block bootstrap is used, which keeps the
    serial dependence of consecutive rows of a time series.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 30:
        raise ValueError("at least 30 pairs are needed")
    block = int(min(max(block, 1), n))
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    point = float(np.cov(x[:, 0], x[:, 1])[0, 1])
    covs = np.empty(replicates)
    n_blocks = -(-n // block)
    chunk = max(1, 4_000_000 // n)
    for s in range(0, replicates, chunk):
        k = min(chunk, replicates - s)
        if block == 1:
            idx = rng.integers(0, n, size=(k, n))
        else:
            starts = rng.integers(0, n - block + 1, size=(k, n_blocks))
            idx = (starts[:, :, None] + np.arange(block)).reshape(k, -1)[:, :n]
        a, b = x[idx, 0], x[idx, 1]
        covs[s:s + k] = ((a - a.mean(1, keepdims=True)) * (b - b.mean(1, keepdims=True))).sum(1) / (n - 1)
    tail = 50 * (1 - level)
    lo, hi = np.percentile(covs, [tail, 100 - tail])
    return BootstrapCi(point, float(lo), float(hi), replicates, level)


def sample_acf(series, max_lag) -> np.ndarray:
    """Biased sample autocorrelations for lags ``0..max_lag``."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size <= max_lag:
        raise ValueError("series is shorter than max_lag")
    xc = x - x.mean()
    c0 = np.dot(xc, xc) / x.size
    if not c0 > 0:
        raise DegenerateSeriesError("series has zero variance; autocorrelation undefined")
    out = np.array([np.dot(xc[: x.size - k], xc[k:]) / x.size for k in range(max_lag + 1)])
    return out / c0


def bartlett_band(lam, delta, max_lag, m, level=0.95, simultaneous=False):
    """Band ``(lo, hi)`` for the sample ACF of an AR(1) series at lags ``1..max_lag``.

    Uses Bartlett's large-sample variance for an AR(1) with coefficient
    ``phi = exp(-lam delta)``.  The band is pointwise unless ``simultaneous``
    is set, in which case each lag gets level ``1 - (1 - level) / max_lag``
    (Bonferroni) so the whole curve is covered with probability at least
    ``level``.
    """
    if simultaneous:
        level = 1 - (1 - level) / max_lag
    phi = np.exp(-lam * delta)
    k = np.arange(1, max_lag + 1)
    p2k = phi ** (2 * k)
    var = ((1 + phi**2) * (1 - p2k) / (1 - phi**2) - 2 * k * p2k) / m
    z = stats.norm.ppf(0.5 + level / 2)
    rho = phi**k
    return rho - z * np.sqrt(var), rho + z * np.sqrt(var)
