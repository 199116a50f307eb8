"""Exact per-category cosine index over non-displayed items."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from config.logger_config import logger
from Src.dataset.types import CatalogArrays
from Src.model.embeddings import EmbeddingTable


@dataclass(slots=True)
class CategoryShard:
    ids: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.shape[0])


@dataclass(slots=True)
class SimilarityIndex:
    shards: dict[int, CategoryShard]
    threshold: int
    skipped_categories: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return sum(len(s) for s in self.shards.values())

    def item_ids(self) -> set[int]:
        return {int(i) for s in self.shards.values() for i in s.ids}

    def top_k(
        self,
        anchor_id: int,
        anchor_vector: np.ndarray,
        category: int,
        k: int,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Up to ``k`` (ids, cosines), best first, ties by ascending id.

        The anchor itself never appears in its own result.
        """
        shard = self.shards.get(int(category))
        if shard is None or k <= 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        anchor = np.asarray(anchor_vector, dtype=np.float64)
        anchor = anchor / np.linalg.norm(anchor)
        sims = shard.vectors @ anchor
        keep = shard.ids != anchor_id
        ids, sims = shard.ids[keep], sims[keep]
        order = np.lexsort((ids, -sims))[:k]
        return ids[order], sims[order]


def build_index(
    s1_embeddings: EmbeddingTable,
    catalog: CatalogArrays,
    non_displayed_threshold: int,
) -> SimilarityIndex:
    """Index S1 embeddings of items with fewer than ``non_displayed_threshold`` impressions."""
    vectors = s1_embeddings.normalized().lookup(catalog.ids)
    hidden = catalog.impressions < non_displayed_threshold
    shards: dict[int, CategoryShard] = {}
    skipped: list[int] = []
    for category in np.unique(catalog.categories):
        rows = np.flatnonzero(hidden & (catalog.categories == category))
        if rows.size == 0:
            skipped.append(int(category))
            continue
        order = rows[np.argsort(catalog.ids[rows], kind="stable")]
        shards[int(category)] = CategoryShard(catalog.ids[order].copy(), vectors[order])
    if skipped:
        logger.warning(
            "No non-displayed items (impressions < %d) in categories %s; their anchors get no positive",
            non_displayed_threshold,
            skipped,
        )
    index = SimilarityIndex(shards, int(non_displayed_threshold), skipped)
    logger.info("Similarity index holds %d non-displayed items in %d categories", len(index), len(shards))
    return index


__all__ = ["CategoryShard", "SimilarityIndex", "build_index"]
