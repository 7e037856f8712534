"""Run configuration: an INI file with fixed sections, overridable from the CLI.

Example::

    [data]
    path = electricity.csv
    timestamp_col = date
    split = 7/10,1/10,1/5

    [model]
    input_len = 96
    output_len = 192
    period = 24
    depth = 2
    domain_mode = frequency

    [train]
    lr = 0.0001
    max_epochs = 10
    seed = 0

    [baseline]
    r_candidates = 1,2,3,4,5

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, fields
from pathlib import Path

from .baseline import DEFAULT_R_CANDIDATES
from .dataio import DEFAULT_SPLIT, SplitSpec
from .errors import ConfigError, MissingFile
from .model import ForecasterConfig


@dataclass(frozen=True)
class RunConfig:
    # [data]
    path: str | None = None
    timestamp_col: str | None = None
    split: str = str(DEFAULT_SPLIT)
    stride: int = 1
    # [model]
    input_len: int | None = None
    output_len: int | None = None
    period: int | None = None
    depth: int = 2
    domain_mode: str = "frequency"
    # [train]
    lr: float = 1e-4
    batch_size: int = 32
    patience: int = 3
    max_epochs: int = 10
    seed: int = 0
    # [baseline]
    r: int | None = None
    r_candidates: tuple[int, ...] = DEFAULT_R_CANDIDATES
    max_period: int = 200

    def replace(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    @property
    def split_spec(self) -> SplitSpec:
        try:
            return SplitSpec.parse(self.split)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad split {self.split!r}: {exc}") from None

    def forecaster(self, **overrides) -> ForecasterConfig:
        values = {
            "input_len": self.input_len,
            "output_len": self.output_len,
            "period": self.period,
            "depth": self.depth,
            "domain_mode": self.domain_mode,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
        }
        values.update(overrides)
        missing = [k for k in ("input_len", "output_len", "period") if values[k] is None]
        if missing:
            raise ConfigError(f"missing required settings: {', '.join(missing)}")
        return ForecasterConfig(**values)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["r_candidates"] = list(self.r_candidates)
        return d


SECTIONS = {
    "data": ("path", "timestamp_col", "split", "stride"),
    "model": ("input_len", "output_len", "period", "depth", "domain_mode"),
    "train": ("lr", "batch_size", "patience", "max_epochs", "seed"),
    "baseline": ("r", "r_candidates", "max_period"),
}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise ConfigError("empty integer list")
    return values


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("tuple"):
            return parse_int_list(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for section, keys in SECTIONS.items():
        parser[section] = {k: _format(getattr(cfg, k)) for k in keys}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse(text: str, base: RunConfig | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[key] = _coerce(key, raw)
    return dataclasses.replace(base or RunConfig(), **values)


def load(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    return parse(path.read_text(encoding="utf-8"))
