"""Binary parameter checkpoint format.

Layout, all integers 64-bit little-endian:

    magic (8 bytes) | version u64 | tensor_count u64
    per tensor: name_len u64 | name utf-8 | rank u64 | dims u64*rank
                | values float64-le, row-major

Tensors are written in dict insertion order, which makes saves of the same
parameter set byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RGFZCKPT"
VERSION = 1


def save_checkpoint(params: dict, path: str | Path):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", VERSION, len(params)))
        for name, tensor in params.items():
            data = np.asarray(getattr(tensor, "data", tensor), dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Q", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            fh.write(data.tobytes(order="C"))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<QQ", blob, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset = 24
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        dims = struct.unpack_from(f"<{rank}Q", blob, offset)
        offset += 8 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(dims)
        offset += 8 * size
        out[name] = arr.astype(np.float64)
    if offset != len(blob):
        raise ValueError("trailing bytes after last tensor")
    return out
