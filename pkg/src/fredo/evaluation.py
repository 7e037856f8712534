"""Error curves, paired t-tests and the per-series frequency-vs-time comparison."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import model as fm
from .baseline import average_tile_batch
from .dataio import DEFAULT_SPLIT, SplitSpec, TimeSeriesMatrix
from .errors import EmptyInput, FredoError, ShapeMismatch, TooFewPairs, ZeroVarianceDifferences
from .pipeline import prepare
from .tdist import two_sided_p

logger = logging.getLogger(__name__)

ALPHA = 0.05


@dataclass(frozen=True)
class ErrorCurve:
    horizon_mse: np.ndarray
    horizon_mae: np.ndarray
    aggregate_mse: float
    aggregate_mae: float

    def rows(self):
        for o, (m2, m1) in enumerate(zip(self.horizon_mse, self.horizon_mae)):
            yield o, float(m2), float(m1)


def error_curve(preds, targets) -> ErrorCurve:
    """Per-horizon MSE/MAE averaged over every window (and so every series)."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeMismatch(f"predictions {preds.shape} vs targets {targets.shape}")
    if preds.size == 0:
        raise EmptyInput("no windows to evaluate")
    preds = preds.reshape(-1, preds.shape[-1])
    targets = targets.reshape(preds.shape)
    err = preds - targets
    h_mse = np.mean(err**2, axis=0)
    h_mae = np.mean(np.abs(err), axis=0)
    return ErrorCurve(h_mse, h_mae, float(np.mean(h_mse)), float(np.mean(h_mae)))


@dataclass(frozen=True)
class PairedTestResult:
    n: int
    mean_diff: float
    t_stat: float
    p_value: float
    significant_at_5pct: bool

    def to_dict(self) -> dict:
        return asdict(self)


def paired_t_test(errors_a, errors_b) -> PairedTestResult:
    """Two-sided paired t-test on ``errors_a - errors_b`` with n-1 degrees of freedom."""
    a = np.asarray(errors_a, dtype=np.float64).ravel()
    b = np.asarray(errors_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.size} vs {b.size} paired observations")
    n = a.size
    if n < 2:
        raise TooFewPairs(f"a paired t-test needs at least 2 pairs, got {n}")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    scale = max(float(np.max(np.abs(d))), float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
    if sd <= 1e-14 * scale:
        raise ZeroVarianceDifferences("paired differences have zero variance")
    t = mean / (sd / math.sqrt(n))
    p = two_sided_p(t, n - 1)
    return PairedTestResult(n, mean, t, p, p < ALPHA)


@dataclass(frozen=True)
class SeriesComparison:
    series: str
    arm_a_mse: float
    arm_b_mse: float
    arm_a_mae: float
    arm_b_mae: float
    baseline_mse: float
    baseline_mae: float
    arm_a_val_mse: float
    arm_b_val_mse: float
    baseline_val_mse: float
    arm_a_params: int
    arm_b_params: int


@dataclass(frozen=True)
class CompareResult:
    modes: tuple[str, str]
    series: list[SeriesComparison]
    ttest_mse: PairedTestResult
    ttest_mae: PairedTestResult | None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.series])

    def summary(self) -> dict:
        out = {"modes": list(self.modes), "n_series": len(self.series)}
        for name in ("arm_a_mse", "arm_b_mse", "arm_a_mae", "arm_b_mae", "baseline_mse", "baseline_mae"):
            out[f"mean_{name}"] = float(np.mean(self.column(name)))
        return out


def _compare_one(args):
    n, column, cfg_template, modes, seed, split, stride = args
    try:
        data = prepare(column, cfg_template.input_len, cfg_template.output_len, split, stride)
        results = []
        for mode in modes:
            cfg = cfg_template.replace(domain_mode=mode)
            params, report = fm.train(cfg, data.train_windows, data.val_windows, seed=seed)
            preds = fm.forecast(params, cfg, data.test_windows.inputs)
            curve = error_curve(preds, data.test_windows.targets)
            results.append((curve, report.best_val_loss, params.num_parameters()))
        base = average_tile_batch(data.test_windows.inputs, cfg_template.baseline, cfg_template.output_len)
        base_curve = error_curve(base, data.test_windows.targets)
        base_val = fm.baseline_mse(cfg_template, data.val_windows)
    except FredoError as exc:
        exc.args = (f"series {n} ({column.series_names[0]}): {exc}",)
        exc.series_index = n
        raise
    (ca, va, pa), (cb, vb, pb) = results
    return SeriesComparison(
        series=column.series_names[0],
        arm_a_mse=ca.aggregate_mse,
        arm_b_mse=cb.aggregate_mse,
        arm_a_mae=ca.aggregate_mae,
        arm_b_mae=cb.aggregate_mae,
        baseline_mse=base_curve.aggregate_mse,
        baseline_mae=base_curve.aggregate_mae,
        arm_a_val_mse=va,
        arm_b_val_mse=vb,
        baseline_val_mse=base_val,
        arm_a_params=pa,
        arm_b_params=pb,
    )


def univariate_compare(
    dataset: TimeSeriesMatrix,
    cfg_template: fm.ForecasterConfig,
    seed: int = 0,
    split: SplitSpec = DEFAULT_SPLIT,
    modes: tuple[str, str] = ("frequency", "time"),
    stride: int = 1,
    workers: int = 1,
) -> CompareResult:
    """Train one model per series and arm, then t-test the per-series test MSEs.

    Both arms of a series share the seed and shapes; series ``n`` uses
    ``seed + n``.  The t-test is on ``arm_a - arm_b`` (FreDo minus TimeDo by
    default), so a negative mean difference favours the first arm.
    """
    if dataset.n_series < 2:
        raise TooFewPairs("the comparison needs at least 2 series")
    jobs = [(n, dataset.column(n), cfg_template, tuple(modes), seed + n, split, stride) for n in range(dataset.n_series)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_compare_one, jobs))
    else:
        rows = [_compare_one(job) for job in jobs]
    a = np.array([r.arm_a_mse for r in rows])
    b = np.array([r.arm_b_mse for r in rows])
    ttest = paired_t_test(a, b)
    try:
        ttest_mae = paired_t_test([r.arm_a_mae for r in rows], [r.arm_b_mae for r in rows])
    except ZeroVarianceDifferences:
        ttest_mae = None
    return CompareResult(tuple(modes), rows, ttest, ttest_mae)
