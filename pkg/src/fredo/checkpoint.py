"""JSON checkpoints of model parameters.

Layout (``format_version`` 1)::

    {
      "format": "fredo-checkpoint",
      "format_version": 1,
      "config": {ForecasterConfig fields},
      "normalizer": {"means": [...], "stds": [...]} | null,
      "tensors": [{"name": "input_proj.weights", "shape": [O, I], "data": [...]}, ...]
    }

``data`` is the row-major flattening; floats are written with ``repr`` so a
save/load cycle is exact.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .dataio import Normalizer
from .errors import ConfigError, MissingFile, ShapeMismatch
from .model import ForecasterConfig
from .nn import ModelParams

FORMAT = "fredo-checkpoint"
FORMAT_VERSION = 1


def to_json(params: ModelParams, cfg: ForecasterConfig, normalizer: Normalizer | None = None) -> str:
    doc = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "config": dataclasses.asdict(cfg),
        "normalizer": None
        if normalizer is None
        else {"means": normalizer.means.tolist(), "stds": normalizer.stds.tolist()},
        "tensors": [
            {"name": name, "shape": list(t.shape), "data": t.ravel().tolist()} for name, t in params.named_tensors()
        ],
    }
    return json.dumps(doc, indent=1)


def from_json(text: str):
    """Returns ``(params, cfg, normalizer_or_None)``."""
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ConfigError("not a fredo checkpoint")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('format_version')}")
    cfg = ForecasterConfig(**doc["config"])
    tensors = []
    for entry in doc["tensors"]:
        data = np.asarray(entry["data"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if data.size != int(np.prod(shape)):
            raise ShapeMismatch(f"tensor {entry['name']} has {data.size} values for shape {shape}")
        tensors.append(data.reshape(shape))
    params = ModelParams.from_tensors(tensors)
    if params.input_len != cfg.input_len or params.output_len != cfg.output_len or params.depth != cfg.depth:
        raise ShapeMismatch("checkpoint tensors disagree with its config")
    norm = doc.get("normalizer")
    normalizer = None if norm is None else Normalizer(norm["means"], norm["stds"])
    return params, cfg, normalizer


def save(path, params: ModelParams, cfg: ForecasterConfig, normalizer: Normalizer | None = None) -> None:
    Path(path).write_text(to_json(params, cfg, normalizer), encoding="utf-8")


def load(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    return from_json(path.read_text(encoding="utf-8"))
