"""Command-line entry point.

Every command writes into ``--out``: its result files plus ``manifest.json``
recording the resolved configuration, seed, version, timestamps and outputs.
Settings resolve as defaults < ``--config`` file < command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import subprocess
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from . import config as runconfig
from .baseline import AverageTileConfig, average_tile_batch, search_r
from .dataio import (
    TimeSeriesMatrix,
    apply_normalizer,
    chronological_split,
    fit_normalizer,
    load_csv,
    save_csv,
    split_sizes,
)
from .dgpsim import ARProcess, analytic_forecast_variance, monte_carlo_forecast_variance
from .errors import ConfigError, FredoError, InvariantViolation, OutputLocked, TooFewPairs, ZeroVarianceDifferences
from .evaluation import ErrorCurve, error_curve, paired_t_test, univariate_compare
from .model import param_count, predict_windows, train
from .pipeline import prepare
from .spectral import estimate_period
from .synthetic import generate_synthetic, hourly_timestamps

logger = logging.getLogger("fredo")


def _version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


class Run:
    """One command's output directory: lockfile, tracked outputs, manifest."""

    def __init__(self, out_dir, command: str, cfg: runconfig.RunConfig, extra: dict | None = None):
        self.out = Path(out_dir)
        self.command = command
        self.cfg = cfg
        self.extra = extra or {}
        self.outputs: list[str] = []
        self.started = _now()
        self._lock = self.out / ".lock"

    def __enter__(self) -> "Run":
        self.out.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise OutputLocked(f"{self.out} is in use by another run (remove {self._lock} if stale)") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def path(self, name: str) -> Path:
        return self.out / name

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, target)
        if name not in self.outputs:
            self.outputs.append(name)
        return target

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, _dump_json(obj))

    def write_csv(self, name: str, header, rows) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                manifest = {
                    "command": self.command,
                    "config": self.cfg.to_dict(),
                    "seed": self.cfg.seed,
                    "version": _version(),
                    "started": self.started,
                    "finished": _now(),
                    "outputs": sorted(self.outputs + ["manifest.json"]),
                    **self.extra,
                }
                self.write_json("manifest.json", manifest)
            else:
                for name in self.outputs:
                    self.path(name).unlink(missing_ok=True)
        finally:
            self._lock.unlink(missing_ok=True)
        return False


def _check_curve(curve: ErrorCurve) -> None:
    values = np.concatenate([curve.horizon_mse, curve.horizon_mae])
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise InvariantViolation("error curve has negative or non-finite entries")
    if abs(curve.aggregate_mse - float(np.mean(curve.horizon_mse))) > 1e-12 * max(1.0, curve.aggregate_mse):
        raise InvariantViolation("aggregate MSE differs from the mean of the per-horizon curve")


def _curve_rows(curve: ErrorCurve):
    return [(o, m2, m1) for o, m2, m1 in curve.rows()]


def _load_data(cfg: runconfig.RunConfig) -> TimeSeriesMatrix:
    if not cfg.path:
        raise ConfigError("no dataset given (use --data or [data] path)")
    return load_csv(cfg.path, cfg.timestamp_col)


def _resolve_period(cfg: runconfig.RunConfig, matrix: TimeSeriesMatrix) -> tuple[int, dict]:
    if cfg.period is not None:
        return cfg.period, {"period_source": "given"}
    train, _, _ = chronological_split(matrix, cfg.split_spec)
    periods = _series_periods(train, cfg.max_period)
    counts = Counter(periods)
    period = min(counts, key=lambda p: (-counts[p], p))
    logger.info("estimated period %d from the training split", period)
    return period, {"period_source": "estimated", "period_votes": {str(k): v for k, v in sorted(counts.items())}}


def _series_periods(m: TimeSeriesMatrix, max_period: int) -> list[int]:
    cap = min(max_period, m.t_len // 2)
    return [estimate_period(m.values[:, n], cap) for n in range(m.n_series)]


def _per_series_mse(preds, targets, series_index, n_series: int) -> np.ndarray:
    return np.array([np.mean((preds[series_index == n] - targets[series_index == n]) ** 2) for n in range(n_series)])


def _ttest_doc(a, b, label_a: str, label_b: str, metric: str) -> dict:
    doc = {"arm_a": label_a, "arm_b": label_b, "metric": metric, "difference": f"{label_a} - {label_b}"}
    try:
        doc.update(paired_t_test(a, b).to_dict())
    except (TooFewPairs, ZeroVarianceDifferences) as exc:
        doc.update({"n": int(np.size(a)), "skipped": str(exc)})
    return doc


# ---------------------------------------------------------------- commands


def cmd_gen_synthetic(args, cfg):
    period = cfg.period or 24
    matrix = generate_synthetic(args.n_series, args.length, period, cfg.seed, slow_cycles=args.slow_cycles)
    with Run(args.out, "gen-synthetic", cfg.replace(period=period)) as run:
        target = run.path(args.name)
        save_csv(target, matrix, hourly_timestamps(matrix.t_len))
        run.outputs.append(args.name)
        print(target)


def cmd_estimate_period(args, cfg):
    matrix = _load_data(cfg)
    train, _, _ = chronological_split(matrix, cfg.split_spec)
    periods = _series_periods(train, cfg.max_period)
    counts = Counter(periods)
    dataset_period = min(counts, key=lambda p: (-counts[p], p))
    with Run(args.out, "estimate-period", cfg) as run:
        run.write_json(
            "period.json",
            {"dataset_period": dataset_period, "series": dict(zip(matrix.series_names, periods))},
        )
    print(dataset_period)


def cmd_baseline(args, cfg):
    matrix = _load_data(cfg)
    if cfg.output_len is None:
        raise ConfigError("--output-len is required")
    period, period_info = _resolve_period(cfg, matrix)
    output_len = cfg.output_len
    search = None
    if args.search_r:
        candidates = runconfig.parse_int_list(args.search_r)
        train, val, _ = chronological_split(matrix, cfg.split_spec)
        norm = fit_normalizer(train)
        history = apply_normalizer(TimeSeriesMatrix(np.vstack([train.values, val.values]), matrix.series_names), norm)
        search = search_r(history, period, candidates, output_len, val_len=val.t_len, input_cap=cfg.input_len)
        r = search.best_r
    elif cfg.r is not None:
        r = cfg.r
    elif cfg.input_len is not None:
        if cfg.input_len % period:
            raise ConfigError(f"input_len {cfg.input_len} is not a multiple of period {period}")
        r = cfg.input_len // period
    else:
        r = 1
    tile = AverageTileConfig(period, r)
    data = prepare(matrix, tile.input_len, output_len, cfg.split_spec, cfg.stride)
    windows = data.test_windows
    preds = average_tile_batch(windows.inputs, tile, output_len)
    curve = error_curve(preds, windows.targets)
    _check_curve(curve)
    metrics = {
        "model": "AverageTile",
        "period": period,
        "r": r,
        "input_len": tile.input_len,
        "output_len": output_len,
        "test_windows": len(windows),
        "test_mse": curve.aggregate_mse,
        "test_mae": curve.aggregate_mae,
        "trainable_parameters": 0,
    }
    if search is not None:
        metrics["r_search"] = {
            "chosen_r": search.best_r,
            "val_mse": {str(k): v for k, v in search.table.items()},
            "skipped": list(search.skipped),
        }
    cfg = cfg.replace(period=period, r=r, input_len=tile.input_len)
    extra = {"period": period_info, "chosen_r": r}
    with Run(args.out, "baseline", cfg, extra) as run:
        run.write_json("metrics.json", metrics)
        run.write_csv("error_curve.csv", ("horizon", "mse", "mae"), _curve_rows(curve))
    print(f"AverageTile P={period} r={r}: test MSE {curve.aggregate_mse:.6g} MAE {curve.aggregate_mae:.6g}")


def _forecaster_from(cfg, matrix):
    if cfg.output_len is None:
        raise ConfigError("--output-len is required")
    period, info = _resolve_period(cfg, matrix)
    input_len = cfg.input_len if cfg.input_len is not None else period * (cfg.r or 1)
    fcfg = cfg.forecaster(period=period, input_len=input_len)
    return fcfg, info


def cmd_train(args, cfg):
    matrix = _load_data(cfg)
    fcfg, period_info = _forecaster_from(cfg, matrix)
    data = prepare(matrix, fcfg.input_len, fcfg.output_len, cfg.split_spec, cfg.stride)
    params, report = train(fcfg, data.train_windows, data.val_windows, seed=cfg.seed)
    if report.best_epoch > report.epochs_run or report.best_val_loss > report.initial_val_loss:
        raise InvariantViolation("early stopping returned a checkpoint worse than its starting point")
    if params.num_parameters() != param_count(fcfg):
        raise InvariantViolation("parameter count disagrees with the closed form")
    cfg = cfg.replace(period=fcfg.period, input_len=fcfg.input_len)
    metrics = {
        "model": "FreDo" if fcfg.domain_mode == "frequency" else "TimeDo",
        "domain_mode": fcfg.domain_mode,
        "parameters": param_count(fcfg),
        "best_epoch": report.best_epoch,
        "epochs_run": report.epochs_run,
        "best_val_mse": report.best_val_loss,
        "baseline_val_mse": report.baseline_val_loss,
        "train_windows": len(data.train_windows),
        "val_windows": len(data.val_windows),
    }
    extra = {"period": period_info, "wall_time_seconds": report.wall_time}
    with Run(args.out, "train", cfg, extra) as run:
        run.write_text("checkpoint.json", checkpoint.to_json(params, fcfg, data.normalizer))
        run.write_json("train_report.json", report.to_dict(include_time=False))
        run.write_json("metrics.json", metrics)
    print(f"{metrics['model']}: best val MSE {report.best_val_loss:.6g} (AverageTile {report.baseline_val_loss:.6g})")


def cmd_eval(args, cfg):
    ckpt = args.checkpoint or str(Path(args.out) / "checkpoint.json")
    params, fcfg, stored_norm = checkpoint.load(ckpt)
    matrix = _load_data(cfg)
    data = prepare(matrix, fcfg.input_len, fcfg.output_len, cfg.split_spec, cfg.stride)
    if stored_norm is not None and (
        stored_norm.n_series != data.normalizer.n_series
        or not np.allclose(stored_norm.means, data.normalizer.means, rtol=1e-12, atol=1e-12)
    ):
        raise ConfigError("checkpoint was trained on a different dataset or split")
    pred = predict_windows(params, fcfg, data.test_windows)
    base = average_tile_batch(data.test_windows.inputs, fcfg.baseline, fcfg.output_len)
    curve = error_curve(pred.preds, pred.targets)
    base_curve = error_curve(base, pred.targets)
    _check_curve(curve)
    _check_curve(base_curve)
    name = "FreDo" if fcfg.domain_mode == "frequency" else "TimeDo"
    metrics = {
        "model": name,
        "checkpoint": os.path.basename(ckpt),
        "test_windows": len(pred),
        "test_mse": curve.aggregate_mse,
        "test_mae": curve.aggregate_mae,
        "baseline_test_mse": base_curve.aggregate_mse,
        "baseline_test_mae": base_curve.aggregate_mae,
        "parameters": param_count(fcfg),
    }
    n = matrix.n_series
    model_mse = _per_series_mse(pred.preds, pred.targets, pred.series_index, n)
    base_mse = _per_series_mse(base, pred.targets, pred.series_index, n)
    ttest = _ttest_doc(model_mse, base_mse, name, "AverageTile", "per-series test MSE")
    cfg = cfg.replace(period=fcfg.period, input_len=fcfg.input_len, output_len=fcfg.output_len)
    with Run(args.out, "eval", cfg) as run:
        run.write_json("metrics.json", metrics)
        run.write_csv("error_curve.csv", ("horizon", "mse", "mae"), _curve_rows(curve))
        run.write_csv("baseline_error_curve.csv", ("horizon", "mse", "mae"), _curve_rows(base_curve))
        run.write_json("ttest.json", ttest)
    print(f"{name}: test MSE {curve.aggregate_mse:.6g} MAE {curve.aggregate_mae:.6g}")


def cmd_compare_domains(args, cfg):
    matrix = _load_data(cfg)
    fcfg, period_info = _forecaster_from(cfg, matrix)
    modes = ("frequency", "time") if not args.control else ("time", "time")
    result = univariate_compare(matrix, fcfg, cfg.seed, cfg.split_spec, modes, cfg.stride, workers=args.workers)
    a_params, b_params = result.column("arm_a_params"), result.column("arm_b_params")
    if np.any(a_params != b_params):
        raise InvariantViolation("paired models differ in size")
    label = {"frequency": "FreDo", "time": "TimeDo"}
    la, lb = label[modes[0]], label[modes[1]]
    header = (
        "series",
        f"{la}_mse",
        f"{lb}_mse",
        f"{la}_mae",
        f"{lb}_mae",
        "AverageTile_mse",
        "AverageTile_mae",
        "parameters",
    )
    rows = [
        (s.series, s.arm_a_mse, s.arm_b_mse, s.arm_a_mae, s.arm_b_mae, s.baseline_mse, s.baseline_mae, s.arm_a_params)
        for s in result.series
    ]
    ttest = {
        "mse": result.ttest_mse.to_dict() | {"difference": f"{la} - {lb}"},
        "mae": None if result.ttest_mae is None else result.ttest_mae.to_dict() | {"difference": f"{la} - {lb}"},
        "n": len(result.series),
    }
    summary = result.summary()
    metrics = {
        "arms": [la, lb],
        "n_series": summary["n_series"],
        f"mean_{la}_mse": summary["mean_arm_a_mse"],
        f"mean_{lb}_mse": summary["mean_arm_b_mse"],
        f"mean_{la}_mae": summary["mean_arm_a_mae"],
        f"mean_{lb}_mae": summary["mean_arm_b_mae"],
        "mean_AverageTile_mse": summary["mean_baseline_mse"],
        "mean_AverageTile_mae": summary["mean_baseline_mae"],
        "parameters_per_model": int(a_params[0]),
    }
    cfg = cfg.replace(period=fcfg.period, input_len=fcfg.input_len)
    with Run(args.out, "compare-domains", cfg, {"period": period_info}) as run:
        run.write_csv("per_series.csv", header, rows)
        run.write_json("ttest.json", ttest)
        run.write_json("metrics.json", metrics)
    t = result.ttest_mse
    print(f"{la} {summary['mean_arm_a_mse']:.6g} vs {lb} {summary['mean_arm_b_mse']:.6g}: t={t.t_stat:.3f} p={t.p_value:.3g}")


def cmd_simulate_dgp(args, cfg):
    theta = tuple(float(v) for v in args.theta.split(","))
    try:
        proc = ARProcess(theta, args.c, args.sigma2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.horizons < 1:
        raise ConfigError("--horizons must be >= 1")
    if args.trials < 2:
        raise ConfigError("--trials must be >= 2")
    k = args.horizons - 1
    analytic = analytic_forecast_variance(proc, k)
    empirical = monte_carlo_forecast_variance(proc, k, args.trials, seed=cfg.seed)
    if np.any(np.diff(analytic) < 0):
        raise InvariantViolation("analytic forecast variance decreased with the horizon")
    rows = [(j, float(analytic[j]), float(empirical[j])) for j in range(k + 1)]
    extra = {"process": {"theta": list(theta), "c": args.c, "sigma2": args.sigma2}, "trials": args.trials}
    with Run(args.out, "simulate-dgp", cfg, extra) as run:
        run.write_csv("dgp.csv", ("horizon", "analytic_var", "empirical_var"), rows)
    writer = csv.writer(sys.stdout)
    writer.writerow(("horizon", "analytic_var", "empirical_var"))
    writer.writerows(rows)


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="INI run configuration")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", default="runs/latest", help="output directory (default: runs/latest)")
    g.add_argument("--timestamp-col", dest="timestamp_col")
    g.add_argument("--period", type=int)
    g.add_argument("--input-len", dest="input_len", type=int)
    g.add_argument("--output-len", dest="output_len", type=int)
    g.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    d = data.add_argument_group("data options")
    d.add_argument("--data", dest="path", help="CSV dataset")
    d.add_argument("--split", help="train,val,test fractions, e.g. 0.7,0.1,0.2")
    d.add_argument("--stride", type=int)

    training = argparse.ArgumentParser(add_help=False)
    t = training.add_argument_group("model options")
    t.add_argument("--depth", type=int)
    t.add_argument("--domain", dest="domain_mode", choices=("frequency", "time"))
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--patience", type=int)
    t.add_argument("--max-epochs", dest="max_epochs", type=int)
    t.add_argument("--r", type=int, help="cycles per input window (I = r * P)")

    parser = argparse.ArgumentParser(prog="fredo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write the bundled synthetic dataset")
    p.add_argument("--n-series", type=int, default=24)
    p.add_argument("--length", type=int, default=2400)
    p.add_argument("--slow-cycles", type=int, default=7)
    p.add_argument("--name", default="synthetic.csv")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("estimate-period", parents=[common, data], help="dominant period per series")
    p.add_argument("--max-period", dest="max_period", type=int)
    p.set_defaults(func=cmd_estimate_period)

    p = sub.add_parser("baseline", parents=[common, data], help="evaluate AverageTile")
    p.add_argument("--r", type=int)
    p.add_argument("--search-r", help="comma-separated r candidates chosen on validation MSE")
    p.add_argument("--max-period", dest="max_period", type=int)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("train", parents=[common, data, training], help="train FreDo or TimeDo")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, data], help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", help="checkpoint file (default: <out>/checkpoint.json)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common, data], help="write test-split forecasts of a checkpoint")
    p.add_argument("--checkpoint", help="checkpoint file (default: <out>/checkpoint.json)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare-domains", parents=[common, data, training], help="per-series FreDo vs TimeDo")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--control", action="store_true", help="train TimeDo in both arms (sanity check)")
    p.set_defaults(func=cmd_compare_domains)

    p = sub.add_parser("simulate-dgp", parents=[common], help="AR(p) forecast variance, analytic vs Monte Carlo")
    p.add_argument("--theta", required=True, help="comma-separated AR coefficients theta_1..theta_p")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--horizons", type=int, default=10)
    p.add_argument("--trials", type=int, default=10000)
    p.set_defaults(func=cmd_simulate_dgp)
    return parser


def cmd_predict(args, cfg):
    ckpt = args.checkpoint or str(Path(args.out) / "checkpoint.json")
    params, fcfg, _ = checkpoint.load(ckpt)
    matrix = _load_data(cfg)
    data = prepare(matrix, fcfg.input_len, fcfg.output_len, cfg.split_spec, cfg.stride)
    pred = predict_windows(params, fcfg, data.test_windows)
    # back to the original units
    norm = data.normalizer
    scale = norm.stds[pred.series_index][:, None]
    shift = norm.means[pred.series_index][:, None]
    raw = pred.preds * scale + shift
    n_train, n_val, _ = split_sizes(matrix.t_len, cfg.split_spec)
    # origins are relative to the context-prefixed test block
    first_test_row = n_train + n_val - min(fcfg.input_len, n_val)
    header = ["series", "origin"] + [f"h{o}" for o in range(fcfg.output_len)]
    rows = [
        [matrix.series_names[s], int(o) + first_test_row] + [float(v) for v in raw[k]]
        for k, (s, o) in enumerate(zip(pred.series_index, pred.origins))
    ]
    cfg = cfg.replace(period=fcfg.period, input_len=fcfg.input_len, output_len=fcfg.output_len)
    with Run(args.out, "predict", cfg) as run:
        run.write_csv("predictions.csv", header, rows)
    print(f"{len(rows)} forecasts written")


_OVERRIDES = (
    "seed",
    "timestamp_col",
    "period",
    "input_len",
    "output_len",
    "path",
    "split",
    "stride",
    "depth",
    "domain_mode",
    "lr",
    "batch_size",
    "patience",
    "max_epochs",
    "r",
    "max_period",
)


def resolve_config(args) -> runconfig.RunConfig:
    cfg = runconfig.load(args.config) if getattr(args, "config", None) else runconfig.RunConfig()
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    cfg = cfg.replace(**overrides)
    cfg.split_spec  # validate before any compute
    for name in ("stride", "max_period", "depth", "batch_size", "max_epochs"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be positive")
    if cfg.lr < 0 or not math.isfinite(cfg.lr):
        raise ConfigError("lr must be a finite non-negative number")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        args.func(args, cfg)
    except FredoError as exc:
        print(f"fredo {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
