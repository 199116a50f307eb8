"""Synthetic catalog, queries, click logs and relevance annotations."""

from __future__ import annotations

from importlib import import_module
from typing import Any

_EXPORTS = {
    "Item": "Src.dataset.types",
    "Query": "Src.dataset.types",
    "ClickEvent": "Src.dataset.types",
    "RelevanceAnnotation": "Src.dataset.types",
    "CatalogArrays": "Src.dataset.types",
    "generate_catalog": "Src.dataset.generator",
    "generate_queries": "Src.dataset.generator",
    "simulate_traffic": "Src.dataset.traffic",
    "low_impression_set": "Src.dataset.traffic",
    "split_by_day": "Src.dataset.traffic",
    "annotate_relevance": "Src.dataset.relevance",
    "SyntheticDataset": "Src.dataset.storage",
    "DataDirectory": "Src.dataset.storage",
    "generate_dataset": "Src.dataset.storage",
    "write_dataset": "Src.dataset.storage",
}


def __getattr__(name: str) -> Any:
    if name in _EXPORTS:
        return getattr(import_module(_EXPORTS[name]), name)
    raise AttributeError(f"module 'Src.dataset' has no attribute {name!r}")


__all__ = sorted(_EXPORTS)
