"""Versioned binary checkpoints.

Layout (all integers little-endian uint32)::

    b"STYC" | version | config length | config (UTF-8 JSON, sorted keys)
    | record count | records...

Each record is ``name length | name | rank | dims... | float32 data``,
written in sorted name order, so a load/save round trip is byte-identical.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from typing import Dict, Tuple

import numpy as np

MAGIC = b"STYC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_checkpoint(config: dict, params: Dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<I", len(params)))
    for name in sorted(params):
        arr = np.asarray(params[name])
        raw_name = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def decode_checkpoint(data: bytes) -> Tuple[dict, Dict[str, np.ndarray]]:
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    def u32():
        return struct.unpack("<I", take(4))[0]

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config = json.loads(bytes(take(u32())).decode("utf-8"))
    params = {}
    for _ in range(u32()):
        name = bytes(take(u32())).decode("utf-8")
        rank = u32()
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape)
        params[name] = arr.astype(np.float64)
    if pos != len(view):
        raise CheckpointError("trailing bytes after last parameter record")
    return config, params


def atomic_write_bytes(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def save_checkpoint(path: str, config: dict, params: Dict[str, np.ndarray]):
    atomic_write_bytes(path, encode_checkpoint(config, params))


def load_checkpoint(path: str) -> Tuple[dict, Dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
