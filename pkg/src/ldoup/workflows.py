"""Batch workflows: simulate paths, fit them, check them, and run Monte Carlo studies."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import charfn
from .errors import LdoupError
from .estimation import EstimationResult, fit_ouwvag, fit_wvagou, recover_lambda_eta, theta_dict
from .fourier import FourierSpec, invert_cf
from .moments import stationary_cov, stationary_mean, stationary_variance, zstar_moments
from .params import LdoupModel, ModelKind, ObservationSet, reference_model
from .sampling import EULER, EXACT, PathSample, make_rng, sample_path
from .stats import bartlett_band, bootstrap_cov_ci, ks_test, sample_acf

KS_LEVEL = 0.01


@dataclass
class RunConfig:
    model: LdoupModel
    out: Path = Path(".")
    seed: int = 0
    replicates: int = 1
    m: int = 1000
    scheme: str | None = None
    euler_step: float | None = None
    threads: int = 1
    fourier: dict = field(default_factory=dict)  # optional "points_1d" / "points_2d"

    @property
    def resolved_scheme(self) -> str:
        if self.scheme:
            return self.scheme
        return EXACT if self.model.kind is ModelKind.WVAG_OU else EULER


def load_config(path=None, kind="wvag-ou", delta=None) -> tuple[LdoupModel, dict]:
    """Model and Fourier overrides from a JSON config, or the reference model."""
    if path is None:
        model, fourier = reference_model(kind), {}
    else:
        with open(path) as fh:
            raw = json.load(fh)
        fourier = raw.pop("fourier", {})
        model = LdoupModel.from_dict(raw)
    if delta is not None:
        model = replace(model, delta=float(delta))
    return model.check(), fourier


# -- simulate -------------------------------------------------------------------


def simulate_one(model, m, seed, replicate=0, scheme=None, euler_step=None) -> PathSample:
    ps = sample_path(model, m, make_rng(seed, replicate), scheme, euler_step)
    return replace(ps, seed=seed, replicate=replicate)


def simulate(cfg: RunConfig) -> list[Path]:
    """Write one CSV plus JSON sidecar per replicate; returns the CSV paths."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in range(cfg.replicates):
        ps = simulate_one(cfg.model, cfg.m, cfg.seed, r, cfg.resolved_scheme, cfg.euler_step)
        name = "path.csv" if cfg.replicates == 1 else f"path_{r:04d}.csv"
        ps.save(cfg.out / name)
        written.append(cfg.out / name)
    return written


def regenerate(sidecar) -> PathSample:
    """Rebuild a simulated path from its JSON sidecar."""
    meta = json.loads(Path(sidecar).read_text())
    model = LdoupModel.from_dict(meta["model"])
    return simulate_one(model, meta["m"], meta["seed"], meta["replicate"] or 0,
                        meta["scheme"], meta["euler_step"])


# -- estimate --------------------------------------------------------------------


def estimate(kind, obs: ObservationSet, fourier=None) -> EstimationResult:
    """Exact recovery plus decoupled ML for WVAG-OU; the stepwise pipeline for OU-WVAG."""
    fourier = fourier or {}
    kind = ModelKind(kind)
    if kind is ModelKind.OU_WVAG:
        return fit_ouwvag(obs, grid_points_2d=fourier.get("points_2d"))
    rec = recover_lambda_eta(obs)
    res = fit_wvagou(obs, rec.lambda_hat, rec.eta_hat,
                     grid_points=(fourier.get("points_1d"), fourier.get("points_2d")))
    step = {"stage": "recovery", "n_evals": 0, "converged": True, "n_matches": rec.n_matches,
            "params": {"lambda": rec.lambda_hat, "eta1": float(rec.eta_hat[0]), "eta2": float(rec.eta_hat[1])}}
    res.stage_trace.insert(0, step)
    return res


# -- validate --------------------------------------------------------------------


def stationary_marginal(model: LdoupModel, k: int, n_points=2**13):
    """Stationary law of coordinate ``k`` as a 1D density grid."""
    mean = float(stationary_mean(model)[k])
    var = float(stationary_variance(model)[k])
    layout = FourierSpec.from_moments([mean], [var], n_points)

    def cf(th):
        full = np.zeros(th.shape[:-1] + (model.n,))
        full[..., k] = th[..., 0]
        return np.exp(charfn.stationary_psi(model, full))

    return invert_cf(cf, layout)


def thinning_step(lam, delta, target=0.05) -> int:
    """Stride at which the lag correlation ``exp(-lam delta k)`` drops below ``target``."""
    return max(1, math.ceil(math.log(1 / target) / (lam * delta)))


def validate(model: LdoupModel, obs: ObservationSet, seed=0, max_lag=10, level=0.95,
             bootstrap_replicates=10_000, out: Path | None = None) -> dict:
    """KS, covariance and ACF checks of observed data against ``model``.

    The KS tests use the path thinned to nearly independent points.  The
    covariance interval comes from a moving-block bootstrap of the whole
    path with blocks four thinning strides long, and the ACF check compares
    every observation against a simultaneous Bartlett band.
    """
    if obs.m < max_lag + 1:
        raise ValueError("the path is too short for the ACF check")
    step = thinning_step(model.lam, obs.delta)
    thin = obs.data[::step]
    report = {"thinning": step, "n_thinned": int(thin.shape[0]), "ks": [], "acf": {}}

    cdf_rows = []
    for k in range(obs.n):
        grid = stationary_marginal(model, k)
        res = ks_test(thin[:, k], grid.cdf)
        report["ks"].append({"coordinate": k + 1, "statistic": res.statistic, "p_value": res.p_value,
                             "n": res.n, "pass": res.p_value > KS_LEVEL})
        xs = np.sort(thin[:, k])
        cdf_rows.append((xs, np.arange(1, xs.size + 1) / xs.size, grid.cdf(xs)))

    if obs.n == 2:
        theory = float(stationary_cov(model)[0, 1])
        ci = bootstrap_cov_ci(obs.data, bootstrap_replicates, level, make_rng(seed), block=4 * step)
        report["covariance"] = {"point": ci.point, "lo": ci.lo, "hi": ci.hi, "theoretical": theory,
                                "pass": ci.covers(theory)}

    lo, hi = bartlett_band(model.lam, obs.delta, max_lag, obs.m + 1, level, simultaneous=True)
    lags = np.arange(1, max_lag + 1)
    acfs = []
    for k in range(obs.n):
        r = sample_acf(obs.data[:, k], max_lag)[1:]
        acfs.append(r)
        report["acf"][f"x{k + 1}"] = bool(np.all((r >= lo) & (r <= hi)))
    report["passed"] = bool(all(d["pass"] for d in report["ks"])
                            and report.get("covariance", {"pass": True})["pass"]
                            and all(report["acf"].values()))

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        theo = np.exp(-model.lam * obs.delta * lags)
        cols = [lags, lags * obs.delta, theo, lo, hi] + acfs
        head = "lag,t,theoretical,lo,hi," + ",".join(f"acf_x{k + 1}" for k in range(obs.n))
        np.savetxt(out / "acf.csv", np.column_stack(cols), delimiter=",", header=head,
                   comments="", fmt="%.10g")
        for k, (xs, emp, th) in enumerate(cdf_rows):
            np.savetxt(out / f"ks_x{k + 1}.csv", np.column_stack([xs, emp, th]), delimiter=",",
                       header="x,empirical,theoretical", comments="", fmt="%.10g")
        (out / "validation.json").write_text(json.dumps(report, indent=2))
    return report


# -- Monte Carlo study -------------------------------------------------------------

PARAM_ROWS = {
    ModelKind.WVAG_OU: ["a", "alpha1", "alpha2", "sigma11", "sigma22", "sigma12"],
    ModelKind.OU_WVAG: ["lambda", "a", "alpha1", "alpha2", "mu1", "mu2",
                        "sigma11", "sigma22", "sigma12", "eta1", "eta2"],
}
MOMENT_ROWS = {
    ModelKind.WVAG_OU: ["m2(Z1)", "m4(Z1)", "m2(Z2)", "m4(Z2)", "cov(Z1,Z2)"],
    ModelKind.OU_WVAG: ["m1(Z1)", "m2(Z1)", "m3(Z1)", "m4(Z1)",
                        "m1(Z2)", "m2(Z2)", "m3(Z2)", "m4(Z2)", "cov(Z1,Z2)"],
}


def study_rows(kind: ModelKind) -> list[str]:
    return PARAM_ROWS[kind] + MOMENT_ROWS[kind]


def _row_values(model: LdoupModel, theta: dict) -> dict:
    vals = {k: float(theta[k]) for k in PARAM_ROWS[model.kind]}
    vals.update(dict(zstar_moments(model).rows()))
    return {k: vals[k] for k in study_rows(model.kind)}


def truth_row(model: LdoupModel) -> dict:
    return _row_values(model, theta_dict(model))


def run_replicate(args) -> dict:
    """Simulate and fit one replicate; never raises on package errors."""
    model_dict, m, seed, r, scheme, euler_step, fourier = args
    model = LdoupModel.from_dict(model_dict)
    t0 = time.perf_counter()
    row = {"replicate": r, "ok": False, "error": ""}
    try:
        ps = simulate_one(model, m, seed, r, scheme, euler_step)
        res = estimate(model.kind, ps.observations(), fourier)
        fitted = res.model(model.kind, model.delta)
        row.update(_row_values(fitted, res.theta_hat))
        row.update(ok=True, loglik=res.loglik, n_evals=res.n_evals)
    except LdoupError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time"] = time.perf_counter() - t0
    return row


@dataclass
class StudyTable:
    kind: ModelKind
    rows: list  # (label, truth, mean, rmse)
    n_ok: int
    n_failed: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "true", "mean", "rmse"])
            for label, truth, mean, rmse in self.rows:
                w.writerow([label, f"{truth:.6g}", f"{mean:.6g}", f"{rmse:.6g}"])

    def lookup(self, label):
        for row in self.rows:
            if row[0] == label:
                return row
        raise KeyError(label)


def summarize(model: LdoupModel, replicate_rows) -> StudyTable:
    ok = [r for r in replicate_rows if r["ok"]]
    truth = truth_row(model)
    rows = []
    for label in study_rows(model.kind):
        est = np.array([r[label] for r in ok], dtype=float)
        mean = float(est.mean()) if est.size else math.nan
        rmse = float(np.sqrt(np.mean((est - truth[label]) ** 2))) if est.size else math.nan
        rows.append((label, truth[label], mean, rmse))
    return StudyTable(model.kind, rows, len(ok), len(replicate_rows) - len(ok))


def _write_replicates(path, kind, rows):
    cols = ["replicate", "ok", "error"] + study_rows(kind) + ["loglik", "n_evals"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})


def mc_study(cfg: RunConfig, progress=None) -> StudyTable:
    """Simulate and fit ``cfg.replicates`` paths and tabulate mean and RMSE.

    Replicate ``r`` uses the stream ``(seed, r)`` whatever the thread count,
    and results are aggregated in replicate order, so tables do not depend
    on ``threads``.  Completed replicates are flushed to ``replicates.csv``
    as they finish, so an interrupted study keeps its partial results.
    """
    cfg.out.mkdir(parents=True, exist_ok=True)
    model = cfg.model
    jobs = [(model.to_dict(), cfg.m, cfg.seed, r, cfg.resolved_scheme, cfg.euler_step, cfg.fourier)
            for r in range(cfg.replicates)]
    done = []
    t0 = time.perf_counter()
    try:
        if cfg.threads > 1:
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                for row in pool.map(run_replicate, jobs):
                    done.append(row)
                    _flush(cfg, model, done, progress)
        else:
            for job in jobs:
                done.append(run_replicate(job))
                _flush(cfg, model, done, progress)
    finally:
        table = summarize(model, done)
        table.to_csv(cfg.out / "summary.csv")
        meta = {"config": {"model": model.to_dict(), "m": cfg.m, "seed": cfg.seed,
                           "replicates": cfg.replicates, "scheme": cfg.resolved_scheme,
                           "euler_step": cfg.euler_step, "fourier": cfg.fourier},
                "completed": len(done), "failed": table.n_failed,
                "wall_time": time.perf_counter() - t0}
        (cfg.out / "summary.json").write_text(json.dumps(meta, indent=2))
    return table


def _flush(cfg, model, done, progress):
    _write_replicates(cfg.out / "replicates.csv", model.kind, done)
    if progress is not None:
        progress(done[-1])
