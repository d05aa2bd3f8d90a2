"""Binary matrix + JSON sidecar serialization.

``<name>`` holds raw little-endian row-major values; ``<name>.json`` holds
``{"rows", "cols", "dtype", ...}`` plus caller metadata (token lists, row
index, segment layout).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

_DTYPES = {"f32": "<f4", "f64": "<f8"}


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_matrix(path: str | Path, values: np.ndarray, meta: dict | None = None, dtype: str = "f32") -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    header = dict(meta or {})
    header.update(rows=int(values.shape[0]), cols=int(values.shape[1]), dtype=dtype)
    atomic_write_bytes(path, np.ascontiguousarray(values, dtype=_DTYPES[dtype]).tobytes())
    atomic_write_bytes(sidecar_path(path), dumps_json(header).encode())


def read_matrix(path: str | Path) -> tuple[np.ndarray, dict]:
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    dtype = meta.get("dtype", "f32")
    raw = np.frombuffer(Path(path).read_bytes(), dtype=_DTYPES[dtype])
    values = raw.reshape(meta["rows"], meta["cols"]).astype(np.float64)
    return values, meta
