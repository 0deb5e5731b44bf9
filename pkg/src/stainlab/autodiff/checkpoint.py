"""Flat binary checkpoints: magic, version, JSON tensor directory, then
float32 little-endian payloads.  Self-describing enough that a reader needs
no knowledge of the network that wrote it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError
from .tensor import Tensor

MAGIC = b"STLC"
VERSION = 1


def save_checkpoint(path: str | Path, tensors: dict, meta: dict | None = None) -> Path:
    """Write named arrays (Tensor or ndarray) plus a JSON metadata blob."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    offset = 0
    for name, value in tensors.items():
        arr = value.data if isinstance(value, Tensor) else np.asarray(value)
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"tensors": entries, "meta": meta or {}}, sort_keys=True
    ).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)
    tmp.replace(path)
    return path


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint back as {name: float32 ndarray} plus metadata."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise InvalidArgumentError(f"{path} is not a stainlab checkpoint")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise InvalidArgumentError(f"unsupported checkpoint version {version}")
    header_end = 12 + header_len
    if len(raw) < header_end:
        raise InvalidArgumentError(f"{path} is truncated (header)")
    header = json.loads(raw[12:header_end].decode("utf-8"))
    data = raw[header_end:]
    out: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(data):
            raise InvalidArgumentError(f"{path} is truncated (tensor {entry['name']})")
        out[entry["name"]] = np.frombuffer(data[start:end], dtype="<f4").reshape(shape).copy()
    return out, header.get("meta", {})
