"""FreDo and TimeDo forecasters built on the AverageTile baseline.

Both models compute the AverageTile forecast ``b`` and add a learned
correction produced by an input projection followed by a Mixer stack:

    FreDo:  out = insert_idft(dft_extract(b) + stack(dft_extract(x)))
    TimeDo: out = b + stack(x)

The packing transforms are linear, so the FreDo output is evaluated as
``b + insert_idft(stack(...))``; this is the same function but keeps the
untrained model bit-identical to the baseline.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .baseline import AverageTileConfig, average_tile_batch
from .dataio import TimeSeriesMatrix, WindowBatch, window_batch
from .errors import ConfigError, EmptyTrainingSet, LengthMismatch, NonFiniteLoss
from .spectral import SpectralVector, dft_extract, extract_matrix, insert_matrix

logger = logging.getLogger(__name__)

DOMAIN_MODES = ("frequency", "time")
EVAL_CHUNK = 4096


@dataclass(frozen=True)
class ForecasterConfig:
    input_len: int
    output_len: int
    period: int
    depth: int = 2
    domain_mode: str = "frequency"
    lr: float = 1e-4
    batch_size: int = 32
    patience: int = 3
    max_epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("input_len", "output_len", "period", "depth", "batch_size", "max_epochs"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.input_len % self.period:
            raise ConfigError(f"input_len {self.input_len} is not a multiple of period {self.period}")
        if self.input_len < 2 or self.output_len < 2:
            raise ConfigError("input_len and output_len must be at least 2 for the spectral packing")
        if self.domain_mode not in DOMAIN_MODES:
            raise ConfigError(f"domain_mode must be one of {DOMAIN_MODES}, got {self.domain_mode!r}")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ConfigError(f"lr must be a finite non-negative number, got {self.lr}")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")

    @property
    def r(self) -> int:
        return self.input_len // self.period

    @property
    def baseline(self) -> AverageTileConfig:
        return AverageTileConfig(self.period, self.r)

    def replace(self, **changes) -> "ForecasterConfig":
        return ForecasterConfig(**{**asdict(self), **changes})


def param_count(cfg: ForecasterConfig) -> int:
    i, o = cfg.input_len, cfg.output_len
    return (i * o + o) + cfg.depth * 2 * (o * o + o)


def _check_inputs(inputs: np.ndarray, cfg: ForecasterConfig) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[-1] != cfg.input_len:
        raise LengthMismatch(f"input length {inputs.shape[-1]} != I = {cfg.input_len}")
    return inputs


def forward_batch(params: nn.ModelParams, cfg: ForecasterConfig, inputs):
    """Forecasts for a ``(B, I)`` batch; returns ``(outputs, cache)``."""
    inputs = _check_inputs(inputs, cfg)
    if params.input_len != cfg.input_len or params.output_len != cfg.output_len:
        raise LengthMismatch("parameters do not match the configured I/O lengths")
    base = average_tile_batch(inputs, cfg.baseline, cfg.output_len)
    if cfg.domain_mode == "frequency":
        features = inputs @ extract_matrix(cfg.input_len).T
        h, cache = nn.stack_forward(params, features)
        out = base + h @ insert_matrix(cfg.output_len).T
    else:
        h, cache = nn.stack_forward(params, inputs)
        out = base + h
    return out, cache


def forecast(params: nn.ModelParams, cfg: ForecasterConfig, inputs) -> np.ndarray:
    inputs = _check_inputs(inputs, cfg)
    if inputs.ndim == 1:
        return forward_batch(params, cfg, inputs[None, :])[0][0]
    chunks = [forward_batch(params, cfg, inputs[k : k + EVAL_CHUNK])[0] for k in range(0, len(inputs), EVAL_CHUNK)]
    return np.concatenate(chunks) if chunks else np.zeros((0, cfg.output_len))


def fredo_forward(input, params: nn.ModelParams, cfg: ForecasterConfig) -> np.ndarray:
    if cfg.domain_mode != "frequency":
        raise ConfigError("fredo_forward needs domain_mode='frequency'")
    return forecast(params, cfg, np.asarray(input, dtype=np.float64).ravel())


def timedo_forward(input, params: nn.ModelParams, cfg: ForecasterConfig) -> np.ndarray:
    if cfg.domain_mode != "time":
        raise ConfigError("timedo_forward needs domain_mode='time'")
    return forecast(params, cfg, np.asarray(input, dtype=np.float64).ravel())


def fredo_spectrum(input, params: nn.ModelParams, cfg: ForecasterConfig) -> SpectralVector:
    """The refined packed spectrum ``dft_extract(b) + h`` before the inverse step."""
    input = _check_inputs(np.asarray(input, dtype=np.float64).ravel(), cfg)
    base = average_tile_batch(input, cfg.baseline, cfg.output_len)
    h, _ = nn.stack_forward(params, dft_extract(input).packed)
    return SpectralVector(dft_extract(base).packed + h)


def loss_and_grad(params: nn.ModelParams, cfg: ForecasterConfig, inputs, targets):
    """Time-domain MSE over the batch and its gradient w.r.t. ``params``."""
    out, cache = forward_batch(params, cfg, inputs)
    loss = nn.mse(out, targets)
    dout = nn.mse_grad(out, targets)
    if cfg.domain_mode == "frequency":
        dh = dout @ insert_matrix(cfg.output_len)
    else:
        dh = dout
    grads, _ = nn.backward(params, cache, dh)
    return loss, grads


def batch_mse(params: nn.ModelParams, cfg: ForecasterConfig, windows: WindowBatch) -> float:
    preds = forecast(params, cfg, windows.inputs)
    return float(np.mean((preds - windows.targets) ** 2))


def baseline_mse(cfg: ForecasterConfig, windows: WindowBatch) -> float:
    preds = average_tile_batch(windows.inputs, cfg.baseline, cfg.output_len)
    return float(np.mean((preds - windows.targets) ** 2))


@dataclass
class TrainReport:
    epochs_run: int
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int
    initial_val_loss: float
    best_val_loss: float
    baseline_val_loss: float
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        if not include_time:
            d.pop("wall_time")
        return d


def train(cfg: ForecasterConfig, train_windows: WindowBatch, val_windows: WindowBatch, seed: int | None = None):
    """Mini-batch Adam on time-domain MSE with early stopping on validation MSE.

    Windows from every series share one parameter set.  Epoch 0 is the
    untrained model (equal to AverageTile), so the returned parameters are
    never worse on validation than the baseline.
    """
    if len(train_windows) == 0:
        raise EmptyTrainingSet("no training windows")
    if len(val_windows) == 0:
        raise EmptyTrainingSet("no validation windows")
    _check_inputs(train_windows.inputs, cfg)
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    started = time.perf_counter()

    params = nn.init_params(cfg.input_len, cfg.output_len, cfg.depth, rng)
    state = nn.AdamState.create(params, lr=cfg.lr)
    best_params = params
    best_val = initial_val = batch_mse(params, cfg, val_windows)
    best_epoch = 0
    stale = 0
    train_hist, val_hist = [], []
    n = len(train_windows)
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grad(params, cfg, train_windows.inputs[idx], train_windows.targets[idx])
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.tensors()):
                raise NonFiniteLoss(f"non-finite loss or gradient at epoch {epoch}, batch {b} (loss={loss})")
            params, state = nn.adam_step(params, grads, state)
            total += loss * idx.size
        train_hist.append(total / n)
        val = batch_mse(params, cfg, val_windows)
        if not math.isfinite(val):
            raise NonFiniteLoss(f"non-finite validation loss at epoch {epoch}")
        val_hist.append(val)
        logger.info("epoch %d train %.6g val %.6g", epoch, train_hist[-1], val)
        if val < best_val:
            best_val, best_params, best_epoch, stale = val, params, epoch, 0
        else:
            stale += 1
            if stale >= max(cfg.patience, 1):
                break
    report = TrainReport(
        epochs_run=epoch,
        train_loss=train_hist,
        val_loss=val_hist,
        best_epoch=best_epoch,
        initial_val_loss=initial_val,
        best_val_loss=best_val,
        baseline_val_loss=baseline_mse(cfg, val_windows),
        wall_time=time.perf_counter() - started,
    )
    return best_params, report


@dataclass(frozen=True)
class WindowPredictions:
    preds: np.ndarray
    targets: np.ndarray
    series_index: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return self.preds.shape[0]


def predict_windows(params: nn.ModelParams, cfg: ForecasterConfig, windows: WindowBatch) -> WindowPredictions:
    return WindowPredictions(forecast(params, cfg, windows.inputs), windows.targets, windows.series_index, windows.origins)


def predict_dataset(params: nn.ModelParams, cfg: ForecasterConfig, matrix: TimeSeriesMatrix, stride: int = 1):
    return predict_windows(params, cfg, window_batch(matrix, cfg.input_len, cfg.output_len, stride))
