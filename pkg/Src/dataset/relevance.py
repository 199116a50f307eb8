from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from config.logger_config import logger
from Src.dataset.types import Item, Query, RelevanceAnnotation


def annotate_relevance(
    queries: Sequence[Query],
    items: Sequence[Item],
    threshold: float,
) -> tuple[list[RelevanceAnnotation], list[int]]:
    """Mark an item relevant to a query when their latent cosine reaches ``threshold``.

    Returns the annotations and the ids of queries left with no relevant item.
    """
    if not queries or not items:
        return [], [q.query_id for q in queries]
    item_ids = np.array([it.item_id for it in items], dtype=np.int64)
    p = np.stack([it.latent_style for it in items])
    p = p / np.linalg.norm(p, axis=1, keepdims=True)
    q = np.stack([query.latent_style for query in queries])
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    sims = q @ p.T

    annotations: list[RelevanceAnnotation] = []
    dropped: list[int] = []
    for query, row in zip(queries, sims):
        relevant = {int(i) for i in item_ids[row >= threshold]}
        if relevant:
            annotations.append(RelevanceAnnotation(query.query_id, relevant))
        else:
            dropped.append(query.query_id)
    if dropped:
        logger.warning(
            "Dropped %d of %d queries with no relevant item at threshold %.3f",
            len(dropped),
            len(queries),
            threshold,
        )
    return annotations, dropped


__all__ = ["annotate_relevance"]
