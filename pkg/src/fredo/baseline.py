"""AverageTile: average the observed cycles, tile the mean cycle forward."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataio import TimeSeriesMatrix, window_batch
from .errors import LengthMismatch, NoFeasibleCandidate, TooShort

logger = logging.getLogger(__name__)

DEFAULT_R_CANDIDATES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class AverageTileConfig:
    period: int
    r: int

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise ValueError(f"period must be a positive integer, got {self.period}")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"r must be a positive integer, got {self.r}")

    @property
    def input_len(self) -> int:
        return self.period * self.r


def average_tile_batch(inputs: np.ndarray, cfg: AverageTileConfig, output_len: int) -> np.ndarray:
    """AverageTile over the last axis of ``inputs`` (shape ``(..., I)``)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    period, r = cfg.period, cfg.r
    length = inputs.shape[-1]
    if length != period * r:
        raise LengthMismatch(f"input length {length} != r*P = {r}*{period}")
    if output_len < 1:
        raise ValueError("output_len must be positive")
    # most recent cycle first, accumulated in that order
    acc = np.zeros(inputs.shape[:-1] + (period,))
    for i in range(1, r + 1):
        acc = acc + inputs[..., length - i * period : length - (i - 1) * period]
    cycle = acc / r
    return cycle[..., np.arange(output_len) % period]


def average_tile(input, cfg: AverageTileConfig, output_len: int) -> np.ndarray:
    input = np.asarray(input, dtype=np.float64)
    if input.ndim != 1:
        raise LengthMismatch(f"expected a vector, got shape {input.shape}")
    return average_tile_batch(input, cfg, output_len)


@dataclass(frozen=True)
class RSearchResult:
    best_r: int
    table: dict[int, float]
    skipped: tuple[int, ...] = ()


def search_r(
    history: TimeSeriesMatrix,
    period: int,
    r_candidates,
    output_len: int,
    val_len: int,
    input_cap: int | None = None,
) -> RSearchResult:
    """Choose r by mean validation MSE of AverageTile.

    ``history`` is train followed by validation; the last ``val_len`` rows are
    the validation targets, and inputs may reach back into the training rows.
    Every candidate is scored on the same set of windows (the ones the largest
    feasible r admits) so the table compares like with like.  Ties go to the
    smaller r.
    """
    candidates = sorted({int(r) for r in r_candidates})
    if not candidates:
        raise ValueError("r_candidates is empty")
    t_len = history.t_len
    val_start = t_len - val_len
    feasible, skipped = [], []
    for r in candidates:
        in_len = r * period
        if r < 1 or (input_cap is not None and in_len > input_cap) or in_len + output_len > val_len:
            skipped.append(r)
        else:
            feasible.append(r)
    if not feasible:
        raise NoFeasibleCandidate(
            f"no r in {candidates} satisfies r*P + O <= {val_len} (P={period}, O={output_len})"
        )
    max_in = max(feasible) * period
    first_origin = max(val_start, max_in)
    if first_origin + output_len > t_len:
        raise TooShort("validation span too short for the requested horizon")
    block = history.rows(first_origin - max_in, t_len)
    windows = window_batch(block, max_in, output_len)
    table = {}
    for r in feasible:
        cfg = AverageTileConfig(period, r)
        preds = average_tile_batch(windows.inputs[:, max_in - r * period :], cfg, output_len)
        table[r] = float(np.mean((preds - windows.targets) ** 2))
        logger.debug("r=%d val mse=%.6g", r, table[r])
    best = min(feasible, key=lambda r: (table[r], r))
    return RSearchResult(best, table, tuple(skipped))
