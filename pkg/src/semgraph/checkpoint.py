"""Flat key -> tensor checkpoint container.

One JSON object per line: ``{"key", "shape", "dtype", "data"}`` with the data
base64-encoded row-major.  Keys follow the dotted scheme produced by each
parameter bundle's ``named_values`` (e.g. ``encoder.layer0.basis.3``).
Checkpoints store float64 so that save/load round-trips are lossless; the
embedding corpus format keeps its own float32 encoding.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np


class CheckpointError(ValueError):
    pass


def save_checkpoint(named_values, path) -> None:
    seen = set()
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in named_values:
            if key in seen:
                raise CheckpointError(f"duplicate checkpoint key {key!r}")
            seen.add(key)
            arr = np.ascontiguousarray(value.data, dtype="<f8")
            fh.write(
                json.dumps(
                    {
                        "key": key,
                        "shape": list(arr.shape),
                        "dtype": "<f8",
                        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_checkpoint(path) -> dict[str, np.ndarray]:
    tensors = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        raw = base64.b64decode(obj["data"])
        arr = np.frombuffer(raw, dtype=obj["dtype"]).reshape(obj["shape"]).astype(np.float64)
        if obj["key"] in tensors:
            raise CheckpointError(f"{path}:{lineno}: duplicate key {obj['key']!r}")
        tensors[obj["key"]] = arr
    return tensors


def restore(named_values, tensors: dict[str, np.ndarray]) -> None:
    """Copy saved tensors into live parameters, strictly matching keys/shapes."""
    remaining = dict(tensors)
    for key, value in named_values:
        if key not in remaining:
            raise CheckpointError(f"checkpoint is missing key {key!r}")
        arr = remaining.pop(key)
        if arr.shape != value.data.shape:
            raise CheckpointError(
                f"shape mismatch for {key!r}: {arr.shape} vs {value.data.shape}"
            )
        value.data = arr.copy()
    if remaining:
        raise CheckpointError(f"checkpoint has unused keys: {sorted(remaining)[:5]}")
