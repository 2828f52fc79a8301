"""Binary feature cache (magic GFC1) with a JSON metadata sidecar.

Layout, all little-endian:
    magic "GFC1" | uint32 version=1 | uint32 dtype=1 (float32)
    | uint32 ndim | uint32 dims[ndim] | float32 payload (C order)
    | uint8 labels[dims[0]]

The sidecar at <path>.json records the extraction parameters, the genre<->id
map, and per-item track ids, making caches self-describing.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CacheMismatch, SchemaError

MAGIC = b"GFC1"
VERSION = 1
DTYPE_FLOAT32 = 1


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _header_bytes(dims) -> bytes:
    return (
        MAGIC
        + struct.pack("<III", VERSION, DTYPE_FLOAT32, len(dims))
        + struct.pack(f"<{len(dims)}I", *dims)
    )


def write_cache(path, array: np.ndarray, labels: np.ndarray, metadata: dict) -> None:
    """Write a fully materialized feature array plus labels and sidecar."""
    array = np.ascontiguousarray(array, dtype="<f4")
    labels = np.asarray(labels, dtype=np.uint8)
    if len(labels) != array.shape[0]:
        raise CacheMismatch(f"{len(labels)} labels for {array.shape[0]} items")
    with open(path, "wb") as fh:
        fh.write(_header_bytes(array.shape))
        fh.write(array.tobytes())
        fh.write(labels.tobytes())
    _write_sidecar(path, array.shape, metadata)


class CacheWriter:
    """Streaming writer for caches too large to hold in memory.

    The item count and per-item shape must be known up front; items are
    appended one at a time and labels written on close.
    """

    def __init__(self, path, n_items: int, item_shape: tuple[int, ...], metadata: dict):
        self.path = Path(path)
        self.dims = (n_items,) + tuple(item_shape)
        self.metadata = metadata
        self._fh = open(path, "wb")
        self._fh.write(_header_bytes(self.dims))
        self._written = 0

    def append(self, item: np.ndarray) -> None:
        item = np.ascontiguousarray(item, dtype="<f4")
        if item.shape != self.dims[1:]:
            raise CacheMismatch(f"item shape {item.shape} != {self.dims[1:]}")
        self._fh.write(item.tobytes())
        self._written += 1

    def close(self, labels: np.ndarray) -> None:
        labels = np.asarray(labels, dtype=np.uint8)
        if self._written != self.dims[0] or len(labels) != self.dims[0]:
            raise CacheMismatch(
                f"wrote {self._written} items, expected {self.dims[0]} "
                f"with {len(labels)} labels"
            )
        self._fh.write(labels.tobytes())
        self._fh.close()
        _write_sidecar(self.path, self.dims, self.metadata)


def _write_sidecar(path, dims, metadata: dict) -> None:
    doc = dict(metadata)
    doc["dims"] = list(dims)
    sidecar_path(path).write_text(json.dumps(doc, sort_keys=True, indent=1))


def read_cache(path, mmap: bool = True) -> tuple[np.ndarray, np.ndarray, dict]:
    """Read (array, labels, metadata); the payload is memory-mapped by
    default so GTZAN-scale mel caches do not need to fit in RAM twice."""
    path = Path(path)
    if not path.exists():
        raise CacheMismatch(f"feature cache not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:4] != MAGIC:
            raise CacheMismatch(f"{path}: not a GFC1 feature cache")
        version, dtype, ndim = struct.unpack_from("<III", head, 4)
        if version != VERSION or dtype != DTYPE_FLOAT32:
            raise CacheMismatch(f"{path}: unsupported version/dtype {version}/{dtype}")
        dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        payload_offset = 16 + 4 * ndim
    n_values = int(np.prod(dims))
    expected = payload_offset + 4 * n_values + dims[0]
    actual = path.stat().st_size
    if actual != expected:
        raise CacheMismatch(f"{path}: size {actual} != expected {expected}")
    if mmap:
        array = np.memmap(path, dtype="<f4", mode="r", offset=payload_offset, shape=dims)
    else:
        with open(path, "rb") as fh:
            fh.seek(payload_offset)
            array = np.frombuffer(fh.read(4 * n_values), dtype="<f4").reshape(dims)
    with open(path, "rb") as fh:
        fh.seek(payload_offset + 4 * n_values)
        labels = np.frombuffer(fh.read(dims[0]), dtype=np.uint8)
    side = sidecar_path(path)
    if not side.exists():
        raise SchemaError(f"missing cache sidecar: {side}")
    metadata = json.loads(side.read_text())
    if tuple(metadata.get("dims", ())) != tuple(dims):
        raise CacheMismatch(f"{path}: sidecar dims disagree with header")
    return array, labels, metadata
