"""How far apart popular items sit from their unseen look-alikes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from Src.dataset.types import CatalogArrays
from Src.debias.index import SimilarityIndex
from Src.model.embeddings import EmbeddingTable


@dataclass(frozen=True, slots=True)
class GeometryReport:
    pairs: int
    gap_s2: float
    gap_fused: float

    @property
    def narrowed(self) -> bool:
        return self.gap_fused < self.gap_s2

    def as_dict(self) -> dict[str, float | int | bool]:
        return {
            "pairs": self.pairs,
            "gap_s2": self.gap_s2,
            "gap_fused": self.gap_fused,
            "narrowed": self.narrowed,
        }


def top_impression_ids(catalog: CatalogArrays, fraction: float) -> np.ndarray:
    """The first ``ceil(fraction * n)`` items by impressions desc, id asc."""
    count = math.ceil(fraction * len(catalog))
    order = np.lexsort((catalog.ids, -catalog.impressions))
    return catalog.ids[order[:count]]


def matched_pairs(
    catalog: CatalogArrays,
    index: SimilarityIndex,
    s1_embeddings: EmbeddingTable,
    *,
    fraction: float = 0.1,
) -> list[tuple[int, int]]:
    """Pair each top-impression item with its nearest non-displayed S1 neighbour."""
    s1 = s1_embeddings.normalized()
    pairs = []
    for item_id in top_impression_ids(catalog, fraction):
        category = int(catalog.categories[catalog.row(item_id)])
        ids, _ = index.top_k(int(item_id), s1.lookup([item_id])[0], category, 1)
        if ids.size:
            pairs.append((int(item_id), int(ids[0])))
    return pairs


def cosine_gap(pairs: list[tuple[int, int]], features: EmbeddingTable) -> float:
    """Mean ``1 - cos`` over the pairs in ``features`` space."""
    if not pairs:
        return float("nan")
    unit = features.normalized()
    left = unit.lookup([a for a, _ in pairs])
    right = unit.lookup([b for _, b in pairs])
    return float(np.mean(1.0 - np.sum(left * right, axis=1)))


def geometry_report(
    pairs: list[tuple[int, int]],
    s2_features: EmbeddingTable,
    fused: EmbeddingTable,
) -> GeometryReport:
    return GeometryReport(
        pairs=len(pairs),
        gap_s2=cosine_gap(pairs, s2_features),
        gap_fused=cosine_gap(pairs, fused),
    )


__all__ = [
    "GeometryReport",
    "top_impression_ids",
    "matched_pairs",
    "cosine_gap",
    "geometry_report",
]
