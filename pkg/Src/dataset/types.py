from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(slots=True)
class Item:
    item_id: int
    category_id: int
    latent_style: np.ndarray
    popularity: float
    image: np.ndarray
    impressions: int = 0
    clicks: int = 0

    def as_record(self) -> dict[str, Any]:
        """catalog.jsonl row; the latent goes to the truth sidecar instead."""
        return {
            "item_id": self.item_id,
            "category_id": self.category_id,
            "popularity": self.popularity,
            "impressions": self.impressions,
            "clicks": self.clicks,
            "image": np.asarray(self.image, dtype=np.float32).tolist(),
        }


@dataclass(slots=True)
class Query:
    query_id: int
    image: np.ndarray
    latent_style: np.ndarray
    category_id: int

    def as_record(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "category_id": self.category_id,
            "image": np.asarray(self.image, dtype=np.float32).tolist(),
        }


@dataclass(frozen=True, slots=True)
class ClickEvent:
    query_id: int
    user_id: int
    item_id: int
    position: int
    clicked: int
    context_id: int
    day: int = 0

    def as_record(self) -> dict[str, int]:
        return {
            "query_id": self.query_id,
            "user_id": self.user_id,
            "item_id": self.item_id,
            "position": self.position,
            "clicked": self.clicked,
            "context_id": self.context_id,
            "day": self.day,
        }


@dataclass(slots=True)
class RelevanceAnnotation:
    query_id: int
    relevant_item_ids: set[int] = field(default_factory=set)

    def as_record(self) -> dict[str, Any]:
        return {"query_id": self.query_id, "relevant": sorted(self.relevant_item_ids)}


@dataclass(slots=True)
class GroundTruth:
    """Hidden generator state. Never read by training code."""

    lift: np.ndarray
    category_means: np.ndarray


class CatalogArrays:
    """Column view over a list of items, in list order."""

    __slots__ = ("ids", "categories", "images", "impressions", "clicks", "popularity", "_rows")

    def __init__(self, items: Sequence[Item]) -> None:
        self.ids = np.array([it.item_id for it in items], dtype=np.int64)
        self.categories = np.array([it.category_id for it in items], dtype=np.int64)
        dim = items[0].image.shape[0] if items else 0
        self.images = (
            np.stack([it.image for it in items]).astype(np.float64)
            if items
            else np.zeros((0, dim))
        )
        self.impressions = np.array([it.impressions for it in items], dtype=np.int64)
        self.clicks = np.array([it.clicks for it in items], dtype=np.int64)
        self.popularity = np.array([it.popularity for it in items], dtype=np.float64)
        self._rows = {int(i): r for r, i in enumerate(self.ids)}

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def row(self, item_id: int) -> int:
        return self._rows[int(item_id)]

    def rows(self, item_ids: Sequence[int] | np.ndarray) -> np.ndarray:
        return np.array([self._rows[int(i)] for i in item_ids], dtype=np.int64)


__all__ = [
    "Item",
    "Query",
    "ClickEvent",
    "RelevanceAnnotation",
    "GroundTruth",
    "CatalogArrays",
]
