from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from Src.common.errors import ShapeError
from Src.model.embeddings import EmbeddingTable


@dataclass(frozen=True, slots=True)
class Ranking:
    """Items for one query, best cosine first, ties by ascending item id."""

    query_id: int
    item_ids: np.ndarray
    scores: np.ndarray

    def top(self, k: int) -> np.ndarray:
        return self.item_ids[:k]

    def __len__(self) -> int:
        return int(self.item_ids.shape[0])


def rank_all(queries: EmbeddingTable, items: EmbeddingTable) -> list[Ranking]:
    """Exact full ranking of every item for every query.

    Both tables are expected unit-norm, so the dot product is the cosine.
    """
    if len(items) and len(queries) and queries.dim != items.dim:
        raise ShapeError(
            f"query embeddings have dimension {queries.dim}, items {items.dim}"
        )
    scores = queries.vectors @ items.vectors.T
    rankings = []
    for query_id, row in zip(queries.ids, scores):
        order = np.lexsort((items.ids, -row))
        rankings.append(Ranking(int(query_id), items.ids[order], row[order]))
    return rankings


__all__ = ["Ranking", "rank_all"]
