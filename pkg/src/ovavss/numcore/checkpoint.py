"""Versioned binary weight files.

Layout: magic ``OVAVSS1`` then, per array, ``u32 name_len | name (utf-8) |
u32 rank | u32 dims[rank] | float64 payload`` (all little-endian), until EOF.
"""

import logging
import os
import struct
from pathlib import Path

import numpy as np

from ovavss.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"OVAVSS1"
_U32 = struct.Struct("<I")


def save_checkpoint(path: Path, state: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        for name, array in state.items():
            encoded = name.encode("utf-8")
            array = np.asarray(array, dtype="<f8")
            fh.write(_U32.pack(len(encoded)))
            fh.write(encoded)
            fh.write(_U32.pack(array.ndim))
            for dim in array.shape:
                fh.write(_U32.pack(dim))
            fh.write(array.tobytes())
    os.replace(tmp, path)
    logger.debug(f"Wrote {len(state)} arrays to {path}")


def load_checkpoint(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(path, 0, f"cannot read: {e}") from e
    if not blob.startswith(MAGIC):
        raise CheckpointError(path, 0, "bad magic, not an OVAVSS1 checkpoint")
    state: dict[str, np.ndarray] = {}
    offset = len(MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise CheckpointError(path, offset, f"truncated while reading {what}")
        chunk = blob[offset : offset + n]
        offset += n
        return chunk

    while offset < len(blob):
        record_start = offset
        (name_len,) = _U32.unpack(take(4, "name length"))
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(path, record_start, f"name is not utf-8: {e}") from e
        (rank,) = _U32.unpack(take(4, f"rank of {name}"))
        if rank > 8:
            raise CheckpointError(path, offset - 4, f"implausible rank {rank} for {name}")
        dims = tuple(_U32.unpack(take(4, f"dims of {name}"))[0] for _ in range(rank))
        count = int(np.prod(dims)) if dims else 1
        payload = take(8 * count, f"payload of {name}")
        state[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    return state
