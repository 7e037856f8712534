"""Split -> normalize -> window, shared by the CLI and the domain comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import (
    DEFAULT_SPLIT,
    Normalizer,
    SplitSpec,
    TimeSeriesMatrix,
    WindowBatch,
    apply_normalizer,
    chronological_split,
    fit_normalizer,
    window_batch,
)


@dataclass(frozen=True)
class PreparedData:
    normalizer: Normalizer
    train: TimeSeriesMatrix
    val: TimeSeriesMatrix
    test: TimeSeriesMatrix
    train_windows: WindowBatch
    val_windows: WindowBatch
    test_windows: WindowBatch


def with_context(before: TimeSeriesMatrix, part: TimeSeriesMatrix, input_len: int) -> TimeSeriesMatrix:
    """``part`` preceded by the last ``input_len`` rows of ``before``.

    Windows cut from the result have all of their targets inside ``part``
    while their inputs may reach back across the split boundary.
    """
    head = before.values[max(before.t_len - input_len, 0) :]
    return TimeSeriesMatrix(np.vstack([head, part.values]), part.series_names)


def prepare(
    matrix: TimeSeriesMatrix,
    input_len: int,
    output_len: int,
    split: SplitSpec = DEFAULT_SPLIT,
    stride: int = 1,
    eval_stride: int = 1,
) -> PreparedData:
    train, val, test = chronological_split(matrix, split)
    norm = fit_normalizer(train)
    train, val, test = (apply_normalizer(m, norm) for m in (train, val, test))
    return PreparedData(
        normalizer=norm,
        train=train,
        val=val,
        test=test,
        train_windows=window_batch(train, input_len, output_len, stride),
        val_windows=window_batch(with_context(train, val, input_len), input_len, output_len, eval_stride),
        test_windows=window_batch(with_context(val, test, input_len), input_len, output_len, eval_stride),
    )
