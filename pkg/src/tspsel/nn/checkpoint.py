"""Checkpoint format: one JSON header line, then raw little-endian float64
parameter blobs in header order.  Loading reproduces arrays bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import ParseError
from .model import ModelConfig

MAGIC = b"selector-ckpt"
VERSION = 1


def save_checkpoint(path: str, config: ModelConfig, params: dict[str, np.ndarray], extra: dict | None = None) -> None:
    header = {
        "version": VERSION,
        "config": {
            "input_side": config.input_side,
            "stage_channels": list(config.stage_channels),
            "blocks_per_stage": config.blocks_per_stage,
            "outputs": config.outputs,
        },
        "params": [{"name": k, "shape": list(params[k].shape)} for k in sorted(params)],
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for k in sorted(params):
            fh.write(np.ascontiguousarray(params[k], dtype="<f8").tobytes())


def load_checkpoint(path: str) -> tuple[ModelConfig, dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != MAGIC:
            raise ParseError(f"{path}: not a checkpoint file (bad magic {magic[:20]!r})")
        try:
            header = json.loads(fh.readline().decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: unreadable checkpoint header: {exc}") from None
        if header.get("version") != VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        cfg = header["config"]
        config = ModelConfig(
            input_side=int(cfg["input_side"]),
            stage_channels=tuple(int(c) for c in cfg["stage_channels"]),
            blocks_per_stage=int(cfg["blocks_per_stage"]),
            outputs=int(cfg["outputs"]),
        )
        params: dict[str, np.ndarray] = {}
        for entry in header["params"]:
            shape = tuple(int(d) for d in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            blob = fh.read(count * 8)
            if len(blob) != count * 8:
                raise ParseError(f"{path}: truncated blob for parameter {entry['name']!r}")
            params[entry["name"]] = np.frombuffer(blob, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise ParseError(f"{path}: trailing bytes after final parameter blob")
    return config, params, header.get("extra", {})
