"""Density tables from characteristic functions by discrete Fourier inversion."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MassDeficitError

EPS_FLOOR = 1e-12

# (points per axis, spacing in units of the standard deviation)
DEFAULT_GRID = {1: (2**13, 2.0**-7), 2: (2**10, 2.0**-5)}


@dataclass(frozen=True)
class FourierSpec:
    """Rectangular state-space grid ``center + (j - N/2) * spacing``."""

    n_points: int
    spacing: tuple
    center: tuple

    def __post_init__(self):
        sp = tuple(float(h) for h in np.atleast_1d(self.spacing))
        ce = tuple(float(c) for c in np.atleast_1d(self.center))
        if len(ce) == 1 and len(sp) > 1:
            ce = ce * len(sp)
        if len(sp) not in (1, 2) or len(ce) != len(sp):
            raise ValueError("only 1- and 2-dimensional grids are supported")
        N = int(self.n_points)
        if N < 4 or N & (N - 1):
            raise ValueError("n_points must be a power of two")
        if min(sp) <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "n_points", N)
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "center", ce)

    @property
    def dims(self) -> int:
        return len(self.spacing)

    @classmethod
    def from_moments(cls, mean, var, n_points=None, scale=None) -> "FourierSpec":
        """Grid centred at ``mean`` with spacing ``scale * sqrt(var)`` per axis."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        sd = np.sqrt(np.atleast_1d(np.asarray(var, dtype=float)))
        N0, s0 = DEFAULT_GRID[len(mean)]
        N = N0 if n_points is None else n_points
        s = s0 if scale is None else scale
        return cls(N, tuple(s * sd), tuple(mean))

    def axis(self, k=0) -> np.ndarray:
        N = self.n_points
        return self.center[k] + (np.arange(N) - N // 2) * self.spacing[k]

    def frequencies(self, k=0) -> np.ndarray:
        N = self.n_points
        return (np.arange(N) - N // 2) * (2 * np.pi / (N * self.spacing[k]))

    def theta_grid(self) -> np.ndarray:
        """All frequencies as a read-only array of shape ``(N, [N,] dims)``."""
        return _theta_grid(self)

    @property
    def cell(self) -> float:
        return float(np.prod(self.spacing))

    def covers(self, sd) -> bool:
        """Whether every axis spans at least 12 standard deviations."""
        return all(self.n_points * h >= 12 * s for h, s in zip(self.spacing, np.atleast_1d(sd)))


@lru_cache(maxsize=8)
def _theta_grid(layout):
    if layout.dims == 1:
        th = layout.frequencies(0)[:, None]
    else:
        th = np.stack(np.meshgrid(layout.frequencies(0), layout.frequencies(1), indexing="ij"), -1)
    th.setflags(write=False)
    return th


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Nonnegative density values on a :class:`FourierSpec` grid."""

    layout: FourierSpec
    values: np.ndarray
    clipped_mass: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, layout: FourierSpec, values) -> "DensityGrid":
        v = np.clip(np.asarray(values, dtype=float), 0.0, None)
        return cls(layout, v / (v.sum() * layout.cell))

    @property
    def total_mass(self) -> float:
        return float(self.values.sum() * self.layout.cell)

    def axis(self, k=0):
        return self.layout.axis(k)

    def __call__(self, x, floor=EPS_FLOOR):
        return density_at(self, x, floor)

    def marginal(self, k: int) -> "DensityGrid":
        """Marginal of a 2D grid along axis ``k``."""
        if self.layout.dims == 1:
            return self
        other = 1 - k
        vals = self.values.sum(axis=other) * self.layout.spacing[other]
        layout = FourierSpec(self.layout.n_points, (self.layout.spacing[k],), (self.layout.center[k],))
        return DensityGrid(layout, vals, self.clipped_mass)

    def cdf_nodes(self) -> np.ndarray:
        """Cumulative trapezoid of a 1D grid, rescaled to end at one."""
        if self.layout.dims != 1:
            raise ValueError("cdf is defined for 1D grids")
        return _cumtrapz_unit(self.values)

    def cdf(self, x):
        return np.interp(x, self.axis(0), self.cdf_nodes(), left=0.0, right=1.0)

    def mean(self) -> np.ndarray:
        if self.layout.dims == 1:
            return np.array([np.sum(self.axis(0) * self.values) * self.layout.cell])
        return np.array([self.marginal(k).mean()[0] for k in range(2)])

    def to_csv(self, path) -> None:
        """Dump as ``x[,y],density`` rows."""
        if self.layout.dims == 1:
            cols = [self.axis(0), self.values]
            header = "x,density"
        else:
            X, Y = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
            cols = [X.ravel(), Y.ravel(), self.values.ravel()]
            header = "x,y,density"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt="%.12g")


def _cumtrapz_unit(v):
    inc = 0.5 * (v[..., 1:] + v[..., :-1])
    c = np.concatenate([np.zeros(v.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1)
    tot = c[..., -1:]
    return np.divide(c, tot, out=np.zeros_like(c), where=tot > 0)


def _alternating(N):
    return 1.0 - 2.0 * (np.arange(N) % 2)


def invert_cf(cf, layout: FourierSpec, check_mass=True, cf_values=None, centred=False) -> DensityGrid:
    """Invert a characteristic function onto ``layout``.

    ``cf`` receives the frequency array from :meth:`FourierSpec.theta_grid`;
    ``cf_values`` may be given instead when already computed.  With
    ``centred=True`` the values are taken to be the CF of ``X - center``,
    which saves the phase shift.

    The discrete transform is exactly normalised, so the mass check is applied
    to the positive part: if clipping the negative ripples removes more than
    1% of mass the grid is too coarse or too narrow for the law.
    """
    N = layout.n_points
    vals = cf(layout.theta_grid()) if cf_values is None else cf_values
    v = np.array(vals, dtype=complex).reshape((N,) * layout.dims)
    sign = _alternating(N)
    shifts = []
    for k in range(layout.dims):
        if centred or layout.center[k] == 0.0:
            shifts.append(sign)
        else:
            shifts.append(np.exp(-1j * layout.frequencies(k) * layout.center[k]) * sign)
    if layout.dims == 1:
        v *= shifts[0]
        raw = np.fft.fft(v).real * sign
    else:
        v *= shifts[0][:, None]
        v *= shifts[1][None, :]
        raw = np.fft.fft2(v).real
        raw *= sign[:, None]
        raw *= sign[None, :]
    dtheta = [2 * np.pi / (N * h) for h in layout.spacing]
    raw *= np.prod(dtheta) / (2 * np.pi) ** layout.dims
    pos = np.clip(raw, 0.0, None)
    pos_mass = pos.sum() * layout.cell
    clipped = float(pos_mass - raw.sum() * layout.cell)
    if check_mass and not 0.99 <= pos_mass <= 1.01:
        raise MassDeficitError(pos_mass)
    pos /= pos.sum() * layout.cell
    return DensityGrid(layout, pos, clipped)


def _locate(x, x0, h, N):
    """Cell index and fraction for linear interpolation; snaps onto nodes."""
    s = (x - x0) / h
    r = np.rint(s)
    s = np.where(np.abs(s - r) < 1e-9, r, s)
    i = np.floor(s)
    inside = (s >= 0) & (s <= N - 1)
    i = np.clip(i, 0, N - 2).astype(np.intp)
    return i, s - i, inside


def density_at(grid: DensityGrid, x, floor=EPS_FLOOR):
    """Multilinear interpolation of the grid, floored at ``floor``."""
    layout = grid.layout
    N = layout.n_points
    x = np.asarray(x, dtype=float)
    if layout.dims == 1:
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        i, t, inside = _locate(x, layout.axis(0)[0], layout.spacing[0], N)
        v = grid.values
        out = (1 - t) * v[i] + t * v[i + 1]
    else:
        i, t, in1 = _locate(x[..., 0], layout.axis(0)[0], layout.spacing[0], N)
        j, u, in2 = _locate(x[..., 1], layout.axis(1)[0], layout.spacing[1], N)
        inside = in1 & in2
        v = grid.values
        out = ((1 - t) * (1 - u) * v[i, j] + t * (1 - u) * v[i + 1, j]
               + (1 - t) * u * v[i, j + 1] + t * u * v[i + 1, j + 1])
    out = np.where(inside, out, 0.0)
    return np.maximum(out, floor)


def _invert_linear(cdf, xs, u):
    """Inverse of the piecewise-linear CDF through ``(xs, cdf)`` (rows allowed)."""
    j = np.searchsorted(cdf, u, side="right")
    j = np.clip(j, 1, len(cdf) - 1)
    c0, c1 = cdf[j - 1], cdf[j]
    span = c1 - c0
    frac = np.divide(u - c0, span, out=np.zeros_like(u), where=span > 0)
    return xs[j - 1] + frac * (xs[j] - xs[j - 1])


class GridSampler:
    """Inverse-CDF sampler for a 1D or 2D density grid.

    In 2D the first coordinate is drawn from its marginal and the second from
    the conditional implied by bilinear interpolation between the two
    neighbouring grid rows.
    """

    def __init__(self, grid: DensityGrid):
        self.grid = grid
        self.dims = grid.layout.dims
        x1 = grid.axis(0)
        self._x1 = x1
        if self.dims == 1:
            self._cdf1 = grid.cdf_nodes()
            return
        v = grid.values
        self._m1 = v.sum(axis=1)
        self._cdf1 = _cumtrapz_unit(self._m1)
        self._x2 = grid.axis(1)
        N = grid.layout.n_points
        rows = _cumtrapz_unit(v)
        # Row r occupies [r, r+1] in the flattened, strictly ordered CDF.
        self._flat = (rows + np.arange(N)[:, None]).ravel()
        self._N = N

    def __call__(self, rng, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        u = rng.random(count)
        x1 = _invert_linear(self._cdf1, self._x1, u)
        if self.dims == 1:
            return x1.reshape(shape) if shape else x1[0]
        N, h1 = self._N, self.grid.layout.spacing[0]
        s = np.clip((x1 - self._x1[0]) / h1, 0, N - 1)
        i = np.clip(np.floor(s).astype(np.intp), 0, N - 2)
        t = s - i
        w_lo = (1 - t) * self._m1[i]
        w_hi = t * self._m1[i + 1]
        tot = w_lo + w_hi
        p_hi = np.divide(w_hi, tot, out=(t > 0.5).astype(float), where=tot > 0)
        r = i + (rng.random(count) < p_hi)
        target = r + rng.random(count)
        k = np.searchsorted(self._flat, target, side="left")
        k = np.clip(k, r * N + 1, r * N + N - 1)
        c0, c1 = self._flat[k - 1], self._flat[k]
        span = c1 - c0
        frac = np.divide(target - c0, span, out=np.zeros_like(target), where=span > 0)
        col = k - r * N
        x2 = self._x2[col - 1] + frac * (self._x2[1] - self._x2[0])
        out = np.column_stack([x1, x2])
        return out.reshape(shape + (2,)) if shape else out[0]


def inverse_cdf_sampler(grid: DensityGrid) -> GridSampler:
    return GridSampler(grid)
