"""Command-line front end: ``ldoup simulate|estimate|validate|mc-study``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import LdoupError, NoRepeatedLineError, OptimizerFailedError, ParameterError
from .params import ObservationSet
from .sampling import EULER, EXACT
from .workflows import RunConfig, estimate, load_config, mc_study, simulate, validate

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="model JSON (defaults to the reference model of --kind)")
    common.add_argument("--kind", choices=["wvag-ou", "ou-wvag"], default="wvag-ou")
    common.add_argument("--out", type=Path, default=Path("."))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--delta", type=float)

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--m", type=int, default=1000)
    sim.add_argument("--replicates", type=int, default=1)
    sim.add_argument("--scheme", choices=[EXACT, EULER])
    sim.add_argument("--euler-step", type=float)

    p = argparse.ArgumentParser(prog="ldoup", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common, sim], help="simulate stationary paths")
    est = sub.add_parser("estimate", parents=[common], help="fit a model to a path CSV")
    est.add_argument("--data", type=Path, required=True)
    val = sub.add_parser("validate", parents=[common], help="KS, covariance and ACF checks")
    val.add_argument("--data", type=Path, required=True)
    val.add_argument("--bootstrap", type=int, default=10_000)
    mc = sub.add_parser("mc-study", parents=[common, sim], help="Monte Carlo calibration study")
    mc.add_argument("--threads", type=int, default=1)
    return p


def _load_data(path, delta):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    return ObservationSet.from_csv(path, delta)


def _cmd_simulate(args, model, fourier):
    cfg = RunConfig(model, args.out, args.seed, args.replicates, args.m, args.scheme, args.euler_step)
    for path in simulate(cfg):
        print(path)
    return EXIT_OK


def _cmd_estimate(args, model, fourier):
    obs = _load_data(args.data, args.delta)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        res = estimate(model.kind, obs, fourier)
    except NoRepeatedLineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: no jump-free stretches were found; the data may come from an OU-WVAG model "
              "(try --kind ou-wvag)", file=sys.stderr)
        return EXIT_FIT
    except OptimizerFailedError as exc:
        report = {"error": str(exc), "stage_trace": exc.stage_trace}
        (args.out / "estimate_failed.json").write_text(json.dumps(report, indent=2))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    report = {"kind": model.kind.value, "data": str(args.data), "delta": obs.delta, **res.to_dict()}
    path = args.out / "estimate.json"
    path.write_text(json.dumps(report, indent=2))
    for k, v in res.theta_hat.items():
        print(f"{k:>8s} {float(v): .6f}")
    return EXIT_OK


def _cmd_validate(args, model, fourier):
    obs = _load_data(args.data, args.delta)
    rep = validate(model, obs, args.seed, bootstrap_replicates=args.bootstrap, out=args.out)
    for row in rep["ks"]:
        print(f"KS x{row['coordinate']}: D={row['statistic']:.4f} p={row['p_value']:.4f} "
              f"{'pass' if row['pass'] else 'FAIL'}")
    if "covariance" in rep:
        c = rep["covariance"]
        print(f"cov: {c['point']:.4f} CI ({c['lo']:.4f}, {c['hi']:.4f}) vs {c['theoretical']:.4f} "
              f"{'pass' if c['pass'] else 'FAIL'}")
    for name, ok in rep["acf"].items():
        print(f"ACF {name}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK


def _cmd_mc_study(args, model, fourier):
    cfg = RunConfig(model, args.out, args.seed, args.replicates, args.m, args.scheme, args.euler_step,
                    args.threads, fourier)

    def progress(row):
        status = "ok" if row["ok"] else row["error"]
        print(f"replicate {row['replicate']}: {status} ({row['wall_time']:.1f} s)", flush=True)

    try:
        table = mc_study(cfg, progress)
    except KeyboardInterrupt:
        print(f"interrupted; partial results in {args.out}", file=sys.stderr)
        return 130
    print(f"{'quantity':>12s} {'true':>10s} {'mean':>10s} {'rmse':>10s}")
    for label, truth, mean, rmse in table.rows:
        print(f"{label:>12s} {truth:10.4f} {mean:10.4f} {rmse:10.4f}")
    return EXIT_OK


COMMANDS = {"simulate": _cmd_simulate, "estimate": _cmd_estimate,
            "validate": _cmd_validate, "mc-study": _cmd_mc_study}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        model, fourier = load_config(args.config, args.kind, args.delta)
        return COMMANDS[args.command](args, model, fourier)
    except ParameterError as exc:
        print("invalid model:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v.code}: {v.message}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LdoupError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
