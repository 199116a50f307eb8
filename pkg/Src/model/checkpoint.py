"""CTRL named-tensor checkpoint container.

Layout (little-endian)::

    b"CTRL" | version u32 | tensor count u32
    per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 × rank | f64 payload
    metadata: length u32 | UTF-8 JSON (sorted keys)

The metadata block carries the provenance tag ``{stage, parent_hash}`` and,
for CTR checkpoints, the input layout header.
"""

from __future__ import annotations

import json
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from Src.common.errors import DataError, ProvenanceError
from Src.common.io import require_file, sha256_bytes

MAGIC = b"CTRL"
FORMAT_VERSION = 1

STAGES = ("init", "classifier", "s1", "s2", "ctr")


@dataclass(frozen=True, slots=True)
class Provenance:
    stage: str
    parent_hash: str | None = None

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown provenance stage '{self.stage}'")

    def as_dict(self) -> dict[str, Any]:
        return {"stage": self.stage, "parent_hash": self.parent_hash}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any] | None) -> "Provenance":
        if not payload:
            return cls("init")
        return cls(str(payload.get("stage", "init")), payload.get("parent_hash"))


def require_stage(provenance: Provenance, stage: str, what: str) -> None:
    if provenance.stage != stage:
        raise ProvenanceError(
            f"{what} requires a checkpoint produced by stage '{stage}', "
            f"got '{provenance.stage}'"
        )


@dataclass(slots=True)
class Checkpoint:
    tensors: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)
    sha256: str = ""

    @property
    def provenance(self) -> Provenance:
        return Provenance.from_dict(self.metadata.get("provenance"))


def encode_checkpoint(
    tensors: Mapping[str, np.ndarray],
    metadata: Mapping[str, Any] | None = None,
) -> bytes:
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        array = np.ascontiguousarray(value, dtype="<f8")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DataError(f"tensor name too long: {name[:40]}...")
        if array.ndim > 0xFF:
            raise DataError(f"tensor '{name}' has too many dimensions")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.tobytes())
    meta = json.dumps(dict(metadata or {}), sort_keys=True, separators=(",", ":"))
    meta_bytes = meta.encode("utf-8")
    chunks.append(struct.pack("<I", len(meta_bytes)))
    chunks.append(meta_bytes)
    return b"".join(chunks)


class _Reader:
    def __init__(self, payload: bytes) -> None:
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise DataError("checkpoint is truncated")
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload: bytes) -> Checkpoint:
    reader = _Reader(payload)
    if reader.take(4) != MAGIC:
        raise DataError("not a CTRL checkpoint (bad magic)")
    version, count = reader.unpack("<II")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack("<B")
        dims = reader.unpack(f"<{rank}I") if rank else ()
        n_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = reader.take(8 * n_values)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
    metadata: dict[str, Any] = {}
    if reader.offset < len(payload):
        (meta_len,) = reader.unpack("<I")
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    if reader.offset != len(payload):
        raise DataError("trailing bytes after checkpoint metadata")
    return Checkpoint(tensors=tensors, metadata=metadata, sha256=sha256_bytes(payload))


def save_checkpoint(
    path: Path,
    tensors: Mapping[str, np.ndarray],
    metadata: Mapping[str, Any] | None = None,
) -> str:
    """Write a checkpoint and return the SHA-256 of its bytes."""
    payload = encode_checkpoint(tensors, metadata)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return sha256_bytes(payload)


def load_checkpoint(path: Path) -> Checkpoint:
    return decode_checkpoint(require_file(path, "checkpoint").read_bytes())


__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "STAGES",
    "Provenance",
    "require_stage",
    "Checkpoint",
    "encode_checkpoint",
    "decode_checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
