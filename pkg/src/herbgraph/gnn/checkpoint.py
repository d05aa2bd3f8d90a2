"""Model checkpoints: a JSON header followed by raw little-endian parameters.

Layout: magic ``HGCK``, uint32 header length, UTF-8 JSON header, then each
parameter's bytes in header order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..embed.features import LAYOUT_VERSION
from ..embed.io import atomic_write_bytes
from ..errors import LayoutMismatch
from .models import ModelConfig, build_model

MAGIC = b"HGCK"
_NP_DTYPES = {torch.float32: "<f4", torch.float64: "<f8"}
_TORCH_DTYPES = {"<f4": torch.float32, "<f8": torch.float64}


def checkpoint_bytes(model, seed: int, extra: dict | None = None) -> bytes:
    params = [(n, p.detach().cpu()) for n, p in model.state_dict().items()]
    dtype = _NP_DTYPES[params[0][1].dtype]
    header = {
        "config": model.cfg.to_dict(),
        "seed": int(seed),
        "layout_version": LAYOUT_VERSION,
        "dtype": dtype,
        "params": [[n, list(p.shape)] for n, p in params],
        "extra": extra or {},
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(p.numpy().astype(dtype).tobytes() for _, p in params)
    return MAGIC + struct.pack("<I", len(hb)) + hb + body


def save_checkpoint(path: str | Path, model, seed: int, extra: dict | None = None) -> None:
    atomic_write_bytes(path, checkpoint_bytes(model, seed, extra))


def load_checkpoint(path: str | Path):
    """Returns ``(model, header)``; the model is in eval mode."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise LayoutMismatch(f"{path} is not a herbgraph checkpoint")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + hlen].decode())
    if header["layout_version"] != LAYOUT_VERSION:
        raise LayoutMismatch(f"checkpoint layout {header['layout_version']} != {LAYOUT_VERSION}")
    cfg = ModelConfig(**header["config"])
    dtype = header["dtype"]
    model = build_model(cfg, header["seed"], _TORCH_DTYPES[dtype])
    state = {}
    pos = 8 + hlen
    width = np.dtype(dtype).itemsize
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(shape)
        state[name] = torch.from_numpy(arr.copy())
        pos += count * width
    if pos != len(data):
        raise LayoutMismatch(f"{path}: trailing or missing parameter bytes")
    model.load_state_dict(state)
    model.eval()
    return model, header
