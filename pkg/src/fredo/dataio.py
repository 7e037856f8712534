"""CSV ingestion, chronological splits, per-series z-scoring and windowing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    ConstantSeries,
    DegenerateSplit,
    EmptyDataset,
    MissingFile,
    ParseError,
    ShapeMismatch,
    TooShort,
)


@dataclass(frozen=True)
class TimeSeriesMatrix:
    """A T x N block of observations, one column per series."""

    values: np.ndarray
    series_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeMismatch(f"expected a non-empty T x N matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("time series matrix contains NaN or Inf")
        values.setflags(write=False)
        names = tuple(self.series_names) or tuple(f"series_{n}" for n in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ShapeMismatch(f"{len(names)} names for {values.shape[1]} series")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "series_names", names)

    @property
    def t_len(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def rows(self, start: int, stop: int) -> "TimeSeriesMatrix":
        return TimeSeriesMatrix(self.values[start:stop], self.series_names)

    def column(self, n: int) -> "TimeSeriesMatrix":
        return TimeSeriesMatrix(self.values[:, n : n + 1], (self.series_names[n],))


@dataclass(frozen=True)
class SplitSpec:
    train_frac: Fraction
    val_frac: Fraction
    test_frac: Fraction

    def __post_init__(self):
        fracs = []
        for name in ("train_frac", "val_frac", "test_frac"):
            value = _as_fraction(getattr(self, name))
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
            object.__setattr__(self, name, value)
            fracs.append(value)
        if sum(fracs) != 1:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        """Build from ``"0.7,0.1,0.2"`` or ``"7/10,1/10,1/5"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"split needs three comma-separated fractions, got {text!r}")
        return cls(*parts)

    def __str__(self) -> str:
        return ",".join(str(f) for f in (self.train_frac, self.val_frac, self.test_frac))


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        # 0.7 must mean 7/10, not the binary expansion of 0.7
        return Fraction(repr(value))
    return Fraction(value)


ETT_SPLIT = SplitSpec(Fraction(3, 5), Fraction(1, 5), Fraction(1, 5))
DEFAULT_SPLIT = SplitSpec(Fraction(7, 10), Fraction(1, 10), Fraction(1, 5))


@dataclass(frozen=True)
class Normalizer:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64).ravel()
        stds = np.array(self.stds, dtype=np.float64).ravel()
        if means.shape != stds.shape:
            raise ShapeMismatch("means and stds differ in length")
        bad = np.flatnonzero(~(stds > 0))
        if bad.size:
            raise ConstantSeries(int(bad[0]))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def n_series(self) -> int:
        return self.means.size


@dataclass(frozen=True)
class ForecastWindow:
    origin: int
    input: np.ndarray
    target: np.ndarray
    series_index: int


@dataclass(frozen=True)
class WindowBatch:
    """Array form of a window list, the shape training and evaluation consume."""

    inputs: np.ndarray
    targets: np.ndarray
    series_index: np.ndarray
    origins: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, idx) -> "WindowBatch":
        return WindowBatch(self.inputs[idx], self.targets[idx], self.series_index[idx], self.origins[idx])


def load_csv(path, timestamp_column: str | None = None) -> TimeSeriesMatrix:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        header = [h.strip() for h in header]
        drop = None
        if timestamp_column is not None:
            if timestamp_column not in header:
                raise ConfigError(f"timestamp column {timestamp_column!r} not in {path.name} header {header}")
            drop = header.index(timestamp_column)
        keep = [j for j in range(len(header)) if j != drop]
        rows = []
        for i, raw in enumerate(reader, start=1):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(i, min(len(raw), len(header)) + 1, ",".join(raw))
            row = []
            for j in keep:
                cell = raw[j].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(i, j + 1, cell) from None
                if not math.isfinite(value):
                    raise ParseError(i, j + 1, cell)
                row.append(value)
            rows.append(row)
    if len(rows) < 2:
        raise EmptyDataset(f"{path} has {len(rows)} data rows; need at least 2")
    if not keep:
        raise EmptyDataset(f"{path} has no value columns")
    return TimeSeriesMatrix(np.array(rows, dtype=np.float64), tuple(header[j] for j in keep))


def save_csv(path, m: TimeSeriesMatrix, timestamps=None, timestamp_column: str = "date") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        head = list(m.series_names)
        if timestamps is not None:
            head.insert(0, timestamp_column)
        writer.writerow(head)
        for t, row in enumerate(m.values):
            cells = [repr(float(v)) for v in row]
            if timestamps is not None:
                cells.insert(0, str(timestamps[t]))
            writer.writerow(cells)


def split_sizes(t_len: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = math.floor(t_len * spec.train_frac)
    n_val = math.floor(t_len * spec.val_frac)
    n_test = t_len - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise DegenerateSplit(f"T={t_len} with split {spec} gives sizes ({n_train}, {n_val}, {n_test})")
    return n_train, n_val, n_test


def chronological_split(m: TimeSeriesMatrix, spec: SplitSpec):
    n_train, n_val, _ = split_sizes(m.t_len, spec)
    return m.rows(0, n_train), m.rows(n_train, n_train + n_val), m.rows(n_train + n_val, m.t_len)


def fit_normalizer(train: TimeSeriesMatrix) -> Normalizer:
    means = train.values.mean(axis=0)
    stds = train.values.std(axis=0)
    for n in range(train.n_series):
        col = train.values[:, n]
        if stds[n] == 0 or np.all(col == col[0]):
            raise ConstantSeries(n)
    return Normalizer(means, stds)


def _check_width(m: TimeSeriesMatrix, norm: Normalizer):
    if m.n_series != norm.n_series:
        raise ShapeMismatch(f"normalizer fitted on {norm.n_series} series, matrix has {m.n_series}")


def apply_normalizer(m: TimeSeriesMatrix, norm: Normalizer) -> TimeSeriesMatrix:
    _check_width(m, norm)
    return TimeSeriesMatrix((m.values - norm.means) / norm.stds, m.series_names)


def invert_normalizer(m: TimeSeriesMatrix, norm: Normalizer) -> TimeSeriesMatrix:
    _check_width(m, norm)
    return TimeSeriesMatrix(m.values * norm.stds + norm.means, m.series_names)


def window_origins(t_len: int, input_len: int, output_len: int, stride: int = 1) -> range:
    if input_len < 1 or output_len < 1:
        raise ValueError("input and output lengths must be positive")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if t_len < input_len + output_len:
        raise TooShort(f"T={t_len} < I+O={input_len + output_len}")
    return range(input_len, t_len - output_len + 1, stride)


def window_batch(m: TimeSeriesMatrix, input_len: int, output_len: int, stride: int = 1) -> WindowBatch:
    """All windows of ``m`` as stacked arrays, ordered by (series, origin)."""
    origins = np.fromiter(window_origins(m.t_len, input_len, output_len, stride), dtype=np.int64)
    offsets = np.arange(-input_len, output_len)
    idx = origins[:, None] + offsets[None, :]
    # (N, n_origins, I+O)
    cut = m.values.T[:, idx]
    cut = cut.reshape(-1, input_len + output_len)
    series = np.repeat(np.arange(m.n_series), origins.size)
    return WindowBatch(
        inputs=np.ascontiguousarray(cut[:, :input_len]),
        targets=np.ascontiguousarray(cut[:, input_len:]),
        series_index=series,
        origins=np.tile(origins, m.n_series),
    )


def make_windows(m: TimeSeriesMatrix, input_len: int, output_len: int, stride: int = 1) -> list[ForecastWindow]:
    batch = window_batch(m, input_len, output_len, stride)
    return [
        ForecastWindow(int(o), batch.inputs[k], batch.targets[k], int(s))
        for k, (o, s) in enumerate(zip(batch.origins, batch.series_index))
    ]
