from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from Src.common.errors import DataError
from Src.dataset.types import CatalogArrays, ClickEvent

OOV_ROW = 0
ID_FIELDS = ("user", "item", "category", "context")


def _vocabulary(values: Iterable[int]) -> dict[int, int]:
    return {value: row for row, value in enumerate(sorted({int(v) for v in values}), start=1)}


@dataclass(slots=True)
class FeatureVocab:
    """Row lookup per ID field; row 0 of every table is the out-of-vocabulary row."""

    fields: dict[str, dict[int, int]] = field(default_factory=dict)

    @classmethod
    def fit(cls, events: Sequence[ClickEvent], catalog: CatalogArrays) -> "FeatureVocab":
        item_ids = {e.item_id for e in events}
        return cls(
            {
                "user": _vocabulary(e.user_id for e in events),
                "item": _vocabulary(item_ids),
                "category": _vocabulary(catalog.categories),
                "context": _vocabulary(e.context_id for e in events),
            }
        )

    def size(self, name: str) -> int:
        return len(self.fields[name]) + 1

    def encode(self, name: str, ids: Iterable[int]) -> np.ndarray:
        table = self.fields[name]
        return np.array([table.get(int(i), OOV_ROW) for i in ids], dtype=np.int64)

    def as_dict(self) -> dict[str, list[int]]:
        return {name: sorted(table) for name, table in self.fields.items()}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FeatureVocab":
        try:
            return cls({name: _vocabulary(payload[name]) for name in ID_FIELDS})
        except KeyError as exc:
            raise DataError(f"vocabulary has no '{exc.args[0]}' field") from exc


@dataclass(frozen=True, slots=True)
class TrainSample:
    query_id: int
    item_id: int
    user_id: int
    category_id: int
    context_id: int
    label: int


@dataclass(slots=True)
class SampleBatch:
    """Column view over a run of samples."""

    query_ids: np.ndarray
    item_ids: np.ndarray
    user_ids: np.ndarray
    category_ids: np.ndarray
    context_ids: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_samples(cls, samples: Sequence[TrainSample]) -> "SampleBatch":
        def column(attr: str) -> np.ndarray:
            return np.array([getattr(s, attr) for s in samples], dtype=np.int64)

        return cls(
            query_ids=column("query_id"),
            item_ids=column("item_id"),
            user_ids=column("user_id"),
            category_ids=column("category_id"),
            context_ids=column("context_id"),
            labels=column("label"),
        )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def take(self, rows: np.ndarray) -> "SampleBatch":
        return SampleBatch(
            self.query_ids[rows],
            self.item_ids[rows],
            self.user_ids[rows],
            self.category_ids[rows],
            self.context_ids[rows],
            self.labels[rows],
        )


def build_samples(events: Sequence[ClickEvent], catalog: CatalogArrays) -> list[TrainSample]:
    samples = []
    for event in events:
        try:
            category = int(catalog.categories[catalog.row(event.item_id)])
        except KeyError as exc:
            raise DataError(f"click log refers to unknown item {event.item_id}") from exc
        samples.append(
            TrainSample(
                query_id=event.query_id,
                item_id=event.item_id,
                user_id=event.user_id,
                category_id=category,
                context_id=event.context_id,
                label=event.clicked,
            )
        )
    return samples


__all__ = [
    "OOV_ROW",
    "ID_FIELDS",
    "FeatureVocab",
    "TrainSample",
    "SampleBatch",
    "build_samples",
]
