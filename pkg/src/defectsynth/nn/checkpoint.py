"""Binary checkpoint container.

Layout, all integers little endian:

* 8 bytes magic ``DSCKPT01``
* uint32 format version
* uint32 metadata length, followed by UTF-8 JSON metadata
* uint32 tensor count, then per tensor a uint32 rank and rank uint64 dims
* tensor values as little endian float64, in table order
"""

import json
import struct
from pathlib import Path

import numpy as np

from defectsynth.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from defectsynth.exceptions import CheckpointFormatError


def encode_checkpoint(arrays: list[np.ndarray], metadata: dict) -> bytes:
    """Serializes arrays and JSON metadata into the container format."""
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<I", len(arrays)),
    ]
    for array in arrays:
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
    for array in arrays:
        parts.append(np.asarray(array, dtype="<f8").tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            msg = f"Checkpoint truncated at byte {self.offset}, needed {size} more"
            raise CheckpointFormatError(msg)
        chunk = self.payload[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload: bytes) -> tuple[dict, list[np.ndarray]]:
    """Parses the container format into (metadata, arrays)."""
    reader = _Reader(payload)
    magic = reader.take(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        msg = f"Not a checkpoint, {magic=}"
        raise CheckpointFormatError(msg)
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        msg = f"Unsupported checkpoint {version=}, expected {CHECKPOINT_VERSION}"
        raise CheckpointFormatError(msg)
    (meta_len,) = reader.unpack("<I")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        msg = f"Checkpoint metadata is not valid JSON: {err}"
        raise CheckpointFormatError(msg) from err
    (count,) = reader.unpack("<I")
    shapes = []
    for _ in range(count):
        (rank,) = reader.unpack("<I")
        shapes.append(reader.unpack(f"<{rank}Q") if rank else ())
    arrays = []
    for shape in shapes:
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.take(8 * size), dtype="<f8")
        arrays.append(data.astype(np.float64).reshape(shape))
    if reader.offset != len(payload):
        msg = f"{len(payload) - reader.offset} trailing bytes after checkpoint data"
        raise CheckpointFormatError(msg)
    return metadata, arrays


def save_checkpoint(path: Path | str, arrays: list[np.ndarray], metadata: dict):
    Path(path).write_bytes(encode_checkpoint(arrays, metadata))


def load_checkpoint(path: Path | str) -> tuple[dict, list[np.ndarray]]:
    return decode_checkpoint(Path(path).read_bytes())
