"""Convenience exports for checkpoint and embedding storage."""

from __future__ import annotations

from importlib import import_module

checkpoint = import_module(f"{__name__}.checkpoint")
embeddings = import_module(f"{__name__}.embeddings")
model_cache = import_module(f"{__name__}.model_cache")

Checkpoint = checkpoint.Checkpoint
Provenance = checkpoint.Provenance
save_checkpoint = checkpoint.save_checkpoint
load_checkpoint = checkpoint.load_checkpoint
EmbeddingTable = embeddings.EmbeddingTable
write_embeddings = embeddings.write_embeddings
read_embeddings = embeddings.read_embeddings
find_local_checkpoint = model_cache.find_local_checkpoint
require_checkpoint = model_cache.require_checkpoint

__all__ = [
    "checkpoint",
    "embeddings",
    "model_cache",
    "Checkpoint",
    "Provenance",
    "save_checkpoint",
    "load_checkpoint",
    "EmbeddingTable",
    "write_embeddings",
    "read_embeddings",
    "find_local_checkpoint",
    "require_checkpoint",
]
