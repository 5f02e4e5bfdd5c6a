"""Command-line front end: simulate, wv, fit, test, study, naveval.

Every command is a thin shell over the library: it parses arguments,
loads inputs, invokes one library operation, and writes an artifact
JSON (manifest + payload) with optional CSV mirrors.  Exit codes: 0 on
success, 2 for configuration or data errors, 3 for numerical failures.
The environment variable ``MSICAL_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .fit import FitOptions, agmwm_fit, awv_fit, compute_weights, gmwm_fit, msgmwm_fit
from .inference import near_stationarity_test
from .io import (
    RunManifest,
    load_model,
    load_replicate,
    load_sensor_model,
    write_artifact,
    write_csv,
    write_replicate,
)
from .models import CompositeModel, InternalSensorModel, simulate_path
from .wavelet import estimate_wv, estimate_wv_cov

_FIT_METHODS = ("gmwm", "agmwm", "awv", "msgmwm")
_OMEGA_CHOICES = ("identity", "diag_inv_var", "inv_var", "averaged")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="root RNG seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count(),
        help="worker bound recorded in the manifest (execution is single-process)",
    )


def _resolve_seed(args) -> int:
    env = os.environ.get("MSICAL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise DataError(f"MSICAL_SEED must be an integer, got {env!r}") from exc
    return args.seed


def _manifest(args, command: str, inputs: dict | None = None) -> RunManifest:
    config = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)
    }
    return RunManifest.create(
        command=command, config=config, seed=_resolve_seed(args), inputs=inputs
    )


def _load_signals(paths) -> list:
    return [load_replicate(p) for p in paths]


def _wv_with_cov(rep, depth, ci, n_boot, block_len, seed, need_cov):
    from dataclasses import replace

    wv = estimate_wv(rep.samples, depth=depth, ci_level=ci)
    if need_cov:
        cov = estimate_wv_cov(
            rep.samples, wv.depth, n_boot=n_boot, block_len=block_len, seed=seed
        )
        wv = replace(wv, cov=cov)
    return wv


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(args)
    for i in range(args.reps):
        samples = simulate_path(model, args.length, seed, stream=(i,))
        label = f"{args.prefix}_{i:03d}"
        if args.format == "f64le":
            write_replicate(out_dir / f"{label}.f64le", samples, args.rate_hz, label)
        else:
            np.savetxt(out_dir / f"{label}.csv", samples, delimiter=",")
    return 0


def cmd_wv(args) -> int:
    reps = _load_signals(args.signals)
    seed = _resolve_seed(args)
    need_cov = args.boot > 0
    estimates = [
        _wv_with_cov(r, args.depth, args.ci, args.boot, args.block_len, seed, need_cov)
        for r in reps
    ]
    payload = {
        "estimates": [e.to_dict() for e in estimates],
        "signals": [r.label for r in reps],
    }
    manifest = _manifest(args, "wv", {p: p for p in args.signals})
    write_artifact(args.out, payload, manifest)
    if args.csv:
        rows = []
        for rep, est in zip(reps, estimates):
            for i in range(len(est.levels)):
                rows.append(
                    [
                        rep.label,
                        est.levels[i],
                        est.taus[i],
                        est.nu[i],
                        est.ci_low[i],
                        est.ci_high[i],
                        est.edof[i],
                        est.n_coeffs[i],
                    ]
                )
        write_csv(
            args.csv,
            ["signal", "level", "tau", "nu", "ci_low", "ci_high", "edof", "n_coeffs"],
            rows,
        )
    return 0


def cmd_fit(args) -> int:
    reps = _load_signals(args.signals)
    template = load_model(args.template)
    seed = _resolve_seed(args)
    options = FitOptions(seed=seed)
    need_cov = args.omega != "identity"
    wvs = [
        _wv_with_cov(r, args.depth, 0.95, args.boot, None, seed, need_cov) for r in reps
    ]
    if args.method == "gmwm":
        if len(wvs) != 1:
            raise DataError("gmwm fits exactly one signal; use awv/agmwm/msgmwm for several")
        result = gmwm_fit(wvs[0], template, omega_mode=args.omega, options=options)
    else:
        weights = None
        if args.durations or args.quality:
            durations = (
                _parse_floats(args.durations, len(wvs), "--durations")
                if args.durations
                else [w.n_samples for w in wvs]
            )
            quality = (
                _parse_floats(args.quality, len(wvs), "--quality")
                if args.quality
                else None
            )
            weights = compute_weights(durations, quality)
        fitter = {"agmwm": agmwm_fit, "awv": awv_fit, "msgmwm": msgmwm_fit}[args.method]
        result = fitter(wvs, template, weights=weights, omega_mode=args.omega, options=options)
    manifest = _manifest(
        args, "fit", {p: p for p in [*args.signals, args.template]}
    )
    write_artifact(args.out, result.to_dict(), manifest)
    if args.csv:
        rows = list(zip(result.model.param_names(), result.theta))
        write_csv(args.csv, ["param", "value"], rows)
    return 0


def _parse_floats(text: str, expect: int, flag: str) -> list:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise DataError(f"{flag} must be comma-separated numbers, got {text!r}") from exc
    if len(values) != expect:
        raise DataError(f"{flag} needs {expect} values, got {len(values)}")
    return values


def cmd_test(args) -> int:
    reps = _load_signals(args.signals)
    template = load_model(args.template)
    seed = _resolve_seed(args)
    need_cov = args.omega != "identity"
    wvs = [
        _wv_with_cov(r, args.depth, 0.95, args.boot, None, seed, need_cov) for r in reps
    ]
    result = near_stationarity_test(
        wvs,
        template,
        omega_mode=args.omega,
        n_boot=args.nboot,
        level=args.level,
        options=FitOptions(seed=seed),
        seed=seed,
    )
    manifest = _manifest(args, "test", {p: p for p in [*args.signals, args.template]})
    write_artifact(args.out, result.to_dict(), manifest)
    return 0


def cmd_study(args) -> int:
    from .experiments.study import StudyConfig, run_simulation_study
    from .io import _read_json

    raw = _read_json(args.config)
    try:
        g = InternalSensorModel.from_dict(raw["g"])
    except KeyError as exc:
        raise DataError(f"study config is missing field {exc}") from exc
    seed = os.environ.get("MSICAL_SEED")
    seed = int(seed) if seed is not None else (args.seed if args.seed is not None else raw.get("seed", 0))
    args.seed = seed  # manifest records the resolved seed
    config = StudyConfig(
        g=g,
        k=int(raw.get("k", 6)),
        t=int(raw.get("t", 100_000)),
        b=int(raw.get("b", 100)),
        depth=raw.get("depth"),
        omega_mode=raw.get("omega_mode", "identity"),
        n_boot_cov=int(raw.get("n_boot_cov", 100)),
        oracle_draws=int(raw.get("oracle_draws", 1000)),
        oracle_mode=raw.get("oracle_mode", "draws"),
        seed=seed,
        options=FitOptions(seed=seed),
    )
    report = run_simulation_study(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, "study", {"config": args.config})
    write_artifact(out_dir / "report.json", report.to_dict(), manifest)
    names = list(report.param_names)
    for method, arr in report.estimates.items():
        write_csv(
            out_dir / f"estimates_{method.lower()}.csv",
            ["trial", *names],
            [[i, *row] for i, row in enumerate(arr)],
        )
    targets = report.targets
    write_csv(
        out_dir / "targets.csv",
        ["param", "theta_zero", "theta_mean", "se_theta_zero"],
        zip(names, targets.theta_zero, targets.theta_mean, targets.se_theta_zero),
    )
    return 0


def _model_entry(entry, base: Path) -> CompositeModel:
    if isinstance(entry, str):
        return load_model(base / entry)
    if isinstance(entry, dict):
        return CompositeModel.from_dict(entry)
    raise DataError(f"model entry must be a path or an inline dict, got {type(entry).__name__}")


def cmd_naveval(args) -> int:
    from .experiments.nav import NavScenario, NoiseSource, nav_eval
    from .io import _read_json

    raw = _read_json(args.config)
    base = Path(args.config).parent
    try:
        scenario = NavScenario(
            waypoints=tuple(tuple(p) for p in raw["scenario"]["waypoints"]),
            **{k: v for k, v in raw["scenario"].items() if k != "waypoints"},
        )
        model_entries = raw["models"]
        source_entries = raw["sources"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"scenario config is malformed: {exc}") from exc
    seed = _resolve_seed(args)
    models = {
        label: (_model_entry(pair["accel"], base), _model_entry(pair["gyro"], base))
        for label, pair in model_entries.items()
    }
    n_default = scenario.n_runs * scenario.n_steps
    sources = []
    for idx, entry in enumerate(source_entries):
        label = entry.get("label", f"source{idx}")
        kind = entry.get("type", "simulate")
        if kind == "simulate":
            sources.append(
                NoiseSource.from_models(
                    _model_entry(entry["accel"], base),
                    _model_entry(entry["gyro"], base),
                    int(entry.get("n_total", n_default)),
                    scenario.imu_rate_hz,
                    seed=int(entry.get("seed", seed)),
                    label=label,
                    stream=(idx,),
                )
            )
        elif kind == "files":
            chans = [load_replicate(base / p) for p in entry["channels"]]
            sources.append(
                NoiseSource(
                    label=label,
                    rate_hz=chans[0].rate_hz,
                    channels=tuple(c.samples for c in chans),
                )
            )
        else:
            raise DataError(f"unknown source type {kind!r}")
    metrics = nav_eval(scenario, models, sources, seed=seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, "naveval", {"config": args.config})
    write_artifact(out_dir / "metrics.json", metrics.to_dict(), manifest)
    rows = []
    for m, mlab in enumerate(metrics.model_labels):
        for s, slab in enumerate(metrics.source_labels):
            rows.append(
                [
                    mlab,
                    slab,
                    metrics.median_pos_err[m, s],
                    metrics.median_heading_err[m, s],
                    metrics.coverage_pos[m, s],
                    metrics.coverage_heading[m, s],
                    metrics.rel_to_best_pos[m, s],
                    metrics.n_excluded[m, s],
                ]
            )
    write_csv(
        out_dir / "metrics.csv",
        [
            "model",
            "source",
            "median_pos_err_m",
            "median_heading_err_rad",
            "coverage_pos",
            "coverage_heading",
            "rel_to_best_pos_pct",
            "n_excluded",
        ],
        rows,
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msical",
        description="Multi-signal stochastic calibration via wavelet-variance matching.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate replicate signals from a model")
    p.add_argument("--model", required=True, help="composite model JSON")
    p.add_argument("--length", type=int, required=True, help="samples per replicate")
    p.add_argument("--reps", type=int, default=1, help="number of replicates")
    p.add_argument("--rate-hz", type=float, default=1.0, dest="rate_hz")
    p.add_argument("--format", choices=("f64le", "csv"), default="f64le")
    p.add_argument("--prefix", default="rep")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("wv", help="estimate wavelet variance of signals")
    p.add_argument("signals", nargs="+", help="replicate files (.f64le or .csv)")
    p.add_argument("--depth", type=int, default=None, help="number of levels J")
    p.add_argument("--ci", type=float, default=0.95, help="confidence level")
    p.add_argument("--boot", type=int, default=0, help="bootstrap resamples for covariance")
    p.add_argument("--block-len", type=int, default=None, dest="block_len")
    p.add_argument("--out", required=True, help="artifact JSON path")
    p.add_argument("--csv", default=None, help="optional CSV mirror path")
    _add_common(p)
    p.set_defaults(func=cmd_wv)

    p = sub.add_parser("fit", help="fit a composite model to one or many signals")
    p.add_argument("signals", nargs="+")
    p.add_argument("--template", required=True, help="model template JSON")
    p.add_argument("--method", choices=_FIT_METHODS, default="awv")
    p.add_argument("--omega", choices=_OMEGA_CHOICES, default="identity")
    p.add_argument("--boot", type=int, default=100, help="bootstrap resamples when omega needs covariances")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--durations", default=None, help="comma-separated replicate durations")
    p.add_argument("--quality", default=None, help="comma-separated inverse quality factors")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="near-stationarity bootstrap test across signals")
    p.add_argument("signals", nargs="+")
    p.add_argument("--template", required=True)
    p.add_argument("--nboot", type=int, default=100)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--omega", choices=_OMEGA_CHOICES, default="identity")
    p.add_argument("--boot", type=int, default=100)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("study", help="run a Monte Carlo simulation study")
    p.add_argument("--config", required=True, help="study config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("naveval", help="navigation Monte Carlo evaluation")
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_naveval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
