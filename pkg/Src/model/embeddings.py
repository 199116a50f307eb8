"""VEMB embedding files.

Layout (little-endian)::

    b"VEMB" | version u32 | count u32 | dim u32 | ids u64 × count | f32 rows (count × dim)
"""

from __future__ import annotations

import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from Src.common.errors import DataError, ShapeError
from Src.common.io import require_file

MAGIC = b"VEMB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(slots=True)
class EmbeddingTable:
    """Row ``i`` of ``vectors`` is the embedding of ``ids[i]``."""

    ids: np.ndarray
    vectors: np.ndarray
    _rows: dict[int, int] | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.ids.shape[0]:
            raise ShapeError(
                f"embedding table needs {self.ids.shape[0]} rows, got {self.vectors.shape}"
            )

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def row_of(self) -> dict[int, int]:
        if self._rows is None:
            self._rows = {int(item_id): row for row, item_id in enumerate(self.ids)}
        return self._rows

    def lookup(self, ids: Sequence[int] | np.ndarray) -> np.ndarray:
        rows = self.row_of()
        try:
            index = [rows[int(i)] for i in ids]
        except KeyError as exc:
            raise DataError(f"no embedding for id {exc.args[0]}") from exc
        return self.vectors[index]

    def normalized(self) -> "EmbeddingTable":
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        if np.any(norms <= 1e-12):
            raise DataError("embedding table contains a zero vector")
        return EmbeddingTable(self.ids.copy(), self.vectors / norms)


def write_embeddings(path: Path, table: EmbeddingTable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count, dim = table.vectors.shape
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, count, dim))
        fh.write(np.ascontiguousarray(table.ids, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(table.vectors, dtype="<f4").tobytes())
    return path


def read_embeddings(path: Path) -> EmbeddingTable:
    payload = require_file(path, "embedding file").read_bytes()
    if len(payload) < _HEADER.size:
        raise DataError(f"{path}: embedding file is truncated")
    magic, version, count, dim = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise DataError(f"{path}: not a VEMB file")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported VEMB version {version}")
    ids_end = _HEADER.size + 8 * count
    rows_end = ids_end + 4 * count * dim
    if len(payload) != rows_end:
        raise DataError(f"{path}: expected {rows_end} bytes, found {len(payload)}")
    ids = np.frombuffer(payload[_HEADER.size:ids_end], dtype="<u8").astype(np.int64)
    vectors = np.frombuffer(payload[ids_end:rows_end], dtype="<f4").reshape(count, dim)
    return EmbeddingTable(ids, vectors.astype(np.float64))


__all__ = ["MAGIC", "EmbeddingTable", "write_embeddings", "read_embeddings"]
