"""Parameter containers for WVAG laws and the two OU model families."""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ParameterError


class Violation(NamedTuple):
    code: str
    message: str
    index: int | None = None


def _as_vector(x, n=None, name="vector"):
    v = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if v.ndim != 1 or (n is not None and v.shape[0] != n):
        raise ValueError(f"{name} must be a vector of length {n}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class WvagParams:
    """Parameters ``(a, alpha, mu, Sigma, eta)`` of an n-dimensional WVAG law.

    ``a`` is the shape of the gamma clock shared by all coordinates and
    ``alpha`` holds the per-coordinate time-change scales.  Arrays are stored
    read-only; use :meth:`replace` to derive modified copies.
    """

    a: float
    alpha: np.ndarray
    mu: np.ndarray
    Sigma: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        alpha = _as_vector(self.alpha, name="alpha")
        n = alpha.shape[0]
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mu", _as_vector(self.mu, n, "mu"))
        object.__setattr__(self, "eta", _as_vector(self.eta, n, "eta"))
        S = np.atleast_2d(np.asarray(self.Sigma, dtype=float)).copy()
        if S.shape != (n, n):
            raise ValueError(f"Sigma must be {n}x{n}")
        S.setflags(write=False)
        object.__setattr__(self, "Sigma", S)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def betas(self) -> np.ndarray:
        return betas(self)

    @property
    def alpha_mu(self) -> np.ndarray:
        """Elementwise product of alpha and mu."""
        return self.alpha * self.mu

    @property
    def alpha_sigma(self) -> np.ndarray:
        """Matrix with entries ``Sigma_kl * min(alpha_k, alpha_l)``."""
        return self.Sigma * np.minimum.outer(self.alpha, self.alpha)

    def replace(self, **changes) -> "WvagParams":
        fields = dict(a=self.a, alpha=self.alpha, mu=self.mu, Sigma=self.Sigma, eta=self.eta)
        fields.update(changes)
        return WvagParams(**fields)

    def marginal(self, k: int) -> "WvagParams":
        """One-dimensional law of coordinate ``k``.

        In one dimension the common and idiosyncratic clocks merge into a
        single gamma clock of shape ``1/alpha_k``, so the split of that shape
        between ``a`` and ``beta`` is immaterial; half of it is given to ``a``.
        """
        al = self.alpha[k]
        return WvagParams(0.5 / al, [al], [self.mu[k]], [[self.Sigma[k, k]]], [self.eta[k]])

    def validate(self, require_invertible=False) -> list[Violation]:
        return validate(self, require_invertible)

    def check(self, require_invertible=False) -> "WvagParams":
        errs = validate(self, require_invertible)
        if errs:
            raise ParameterError(errs)
        return self

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "alpha": self.alpha.tolist(),
            "mu": self.mu.tolist(),
            "sigma": self.Sigma.tolist(),
            "eta": self.eta.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, WvagParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict()))


def betas(params: WvagParams) -> np.ndarray:
    """Idiosyncratic clock shapes ``(1 - a alpha_k) / alpha_k``."""
    return (1.0 - params.a * params.alpha) / params.alpha


def validate(params: WvagParams, require_invertible: bool = False) -> list[Violation]:
    """Return every violated constraint (empty list when valid)."""
    out = []
    a, alpha, S = params.a, params.alpha, params.Sigma
    if not np.isfinite(a) or a <= 0:
        out.append(Violation("ShapeNotPositive", f"a={a} must be positive"))
    for k, al in enumerate(alpha):
        if not (al > 0 and a * al < 1):
            out.append(Violation("AlphaOutOfRange", f"alpha[{k}]={al} not in (0, 1/a)", k))
    if not np.all(np.isfinite(S)):
        out.append(Violation("SigmaNotFinite", "Sigma has non-finite entries"))
        return out
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
        out.append(Violation("SigmaNotSymmetric", "Sigma is not symmetric"))
    ev = np.linalg.eigvalsh(0.5 * (S + S.T))
    scale = np.linalg.norm(S, 2)
    if ev.min() < -1e-10 * scale:
        out.append(Violation("SigmaNotPsd", f"Sigma has eigenvalue {ev.min():.3g} < 0"))
    elif require_invertible and ev.min() <= 1e-10 * scale:
        out.append(Violation("SigmaSingular", "Sigma is singular"))
    for name in ("mu", "eta"):
        if not np.all(np.isfinite(getattr(params, name))):
            out.append(Violation("NotFinite", f"{name} has non-finite entries"))
    return out


class ModelKind(enum.Enum):
    WVAG_OU = "wvag-ou"  # stationary law is WVAG
    OU_WVAG = "ou-wvag"  # driving process is WVAG


@dataclass(frozen=True, eq=False)
class LdoupModel:
    """An OU process with autocorrelation rate ``lam`` observed every ``delta``."""

    kind: ModelKind
    lam: float
    wvag: WvagParams
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def n(self) -> int:
        return self.wvag.n

    @property
    def decay(self) -> float:
        """One-step autoregressive coefficient ``exp(-lam * delta)``."""
        return float(np.exp(-self.lam * self.delta))

    @property
    def zeta(self) -> np.ndarray:
        """Location of the innovation's point mass (WVAG-OU)."""
        return self.wvag.eta * np.expm1(self.lam * self.delta)

    def replace(self, **changes) -> "LdoupModel":
        fields = dict(kind=self.kind, lam=self.lam, wvag=self.wvag, delta=self.delta)
        wchanges = {k: changes.pop(k) for k in ("a", "alpha", "mu", "Sigma", "eta") if k in changes}
        fields.update(changes)
        if wchanges:
            fields["wvag"] = fields["wvag"].replace(**wchanges)
        return LdoupModel(**fields)

    def validate(self, require_invertible=False) -> list[Violation]:
        out = validate(self.wvag, require_invertible)
        if not (np.isfinite(self.lam) and self.lam > 0):
            out.append(Violation("LambdaNotPositive", f"lambda={self.lam} must be positive"))
        if not (np.isfinite(self.delta) and self.delta > 0):
            out.append(Violation("DeltaNotPositive", f"delta={self.delta} must be positive"))
        if self.kind is ModelKind.WVAG_OU and np.any(self.wvag.mu != 0):
            out.append(Violation("DriftNotZero", "a WVAG-OU model needs mu = 0 for stationarity"))
        return out

    def check(self, require_invertible=False) -> "LdoupModel":
        errs = self.validate(require_invertible)
        if errs:
            raise ParameterError(errs)
        return self

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "lambda": self.lam}
        d.update(self.wvag.to_dict())
        d["delta"] = self.delta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LdoupModel":
        required = ("kind", "lambda", "a", "alpha", "sigma")
        missing = [k for k in required if k not in d]
        if missing:
            raise ParameterError([Violation("MissingField", f"config lacks '{k}'") for k in missing])
        n = len(d["alpha"])
        try:
            kind = ModelKind(d["kind"])
        except ValueError:
            raise ParameterError([Violation("BadKind", f"unknown kind {d['kind']!r}")]) from None
        w = WvagParams(
            d["a"], d["alpha"], d.get("mu", [0.0] * n), d["sigma"], d.get("eta", [0.0] * n)
        )
        return cls(kind, d["lambda"], w, d.get("delta", 1.0))

    def __eq__(self, other):
        if not isinstance(other, LdoupModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict()))


def load_model(path) -> LdoupModel:
    with open(path) as fh:
        return LdoupModel.from_dict(json.load(fh))


def save_model(model: LdoupModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Equally spaced observations; row k is the state at time k*delta."""

    data: np.ndarray
    delta: float

    def __post_init__(self):
        x = np.asarray(self.data, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("data must be an (m+1) x n matrix")
        if not np.all(np.isfinite(x)):
            raise ValueError("observations must be finite")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "data", x)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def m(self) -> int:
        return self.data.shape[0] - 1

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.delta

    def coordinate(self, k: int) -> "ObservationSet":
        return ObservationSet(self.data[:, k], self.delta)

    def innovations(self, lam: float) -> np.ndarray:
        """``exp(lam delta) x_k - x_{k-1}`` for k = 1..m."""
        x = self.data
        return np.exp(lam * self.delta) * x[1:] - x[:-1]

    def to_csv(self, path) -> None:
        write_path_csv(path, self.data, self.delta)

    @classmethod
    def from_csv(cls, path, delta=None) -> "ObservationSet":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty files are reported below
            raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if raw.shape[0] == 0 or raw.shape[1] < 2:
            raise ValueError(f"{path}: no observations")
        if delta is None:
            delta = raw[1, 0] - raw[0, 0] if raw.shape[0] > 1 else 1.0
        return cls(raw[:, 1:], delta)


def write_path_csv(path, data, delta) -> None:
    data = np.asarray(data, dtype=float)
    t = np.arange(data.shape[0]) * delta
    header = ",".join(["t"] + [f"x{k + 1}" for k in range(data.shape[1])])
    np.savetxt(path, np.column_stack([t, data]), delimiter=",", header=header,
               comments="", fmt="%.17g")


# Unconstrained reparametrisations used by the optimisers.

def logistic(u):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(u, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def wvag_to_free(w: WvagParams) -> np.ndarray:
    """Map ``(a, alpha_1, alpha_2, Sigma_11, Sigma_22, Sigma_12)`` to R^6."""
    a, al, S = w.a, w.alpha, w.Sigma
    rho = S[0, 1] / np.sqrt(S[0, 0] * S[1, 1])
    return np.array([np.log(a), *logit(a * al), np.log(S[0, 0]), np.log(S[1, 1]), np.arctanh(rho)])


def wvag_from_free(u, mu, eta) -> WvagParams:
    """Inverse of :func:`wvag_to_free`; ``alpha_k`` ranges over ``(0, 1/a)``."""
    u = np.asarray(u, dtype=float)
    a = np.exp(u[0])
    al = logistic(u[1:3]) / a
    s11, s22 = np.exp(u[3]), np.exp(u[4])
    s12 = np.tanh(u[5]) * np.sqrt(s11 * s22)
    return WvagParams(a, al, mu, [[s11, s12], [s12, s22]], eta)


def reference_model(kind="wvag-ou", delta=1.0) -> LdoupModel:
    """Reference configuration used throughout the tests and demos."""
    kind = ModelKind(kind)
    mu = [0.0, 0.0] if kind is ModelKind.WVAG_OU else [0.15, -0.06]
    w = WvagParams(1.0, [0.9, 0.5], mu, [[0.18, 0.09], [0.09, 0.08]], [-0.06, 0.0])
    return LdoupModel(kind, 0.5, w, delta)
