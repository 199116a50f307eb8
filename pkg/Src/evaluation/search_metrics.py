"""Visual-search metrics: hit ratio, low-impression ratio and category ratio."""

from __future__ import annotations

from collections.abc import Collection, Mapping, Sequence

from Src.common.errors import DataError
from Src.evaluation.ranking import Ranking


def hit_ratio(rankings: Sequence[Ranking], annotations: Mapping[int, Collection[int]]) -> float:
    """Sum of hits in each query's top-n_q over the sum of n_q, n_q = |relevant|."""
    missing = [r.query_id for r in rankings if r.query_id not in annotations]
    if missing:
        raise DataError(f"queries without relevance annotation: {sorted(missing)}")
    hits = 0
    total = 0
    for ranking in rankings:
        relevant = set(annotations[ranking.query_id])
        n_q = len(relevant)
        hits += len(relevant.intersection(int(i) for i in ranking.top(n_q)))
        total += n_q
    if total == 0:
        raise DataError("hit ratio needs at least one relevant item")
    return hits / total


def _check_depth(rankings: Sequence[Ranking], k: int) -> None:
    if not rankings:
        raise DataError("no rankings to evaluate")
    if k <= 0:
        raise DataError(f"K must be positive, got {k}")
    short = [r.query_id for r in rankings if len(r) < k]
    if short:
        raise DataError(f"K={k} exceeds the ranked catalog for queries {short[:5]}")


def lr_at_k(rankings: Sequence[Ranking], low_impression: Collection[int], k: int) -> float:
    _check_depth(rankings, k)
    low = set(low_impression)
    count = sum(sum(1 for i in r.top(k) if int(i) in low) for r in rankings)
    return count / (len(rankings) * k)


def cr_at_k(
    rankings: Sequence[Ranking],
    query_categories: Mapping[int, int],
    item_categories: Mapping[int, int],
    k: int,
) -> float:
    _check_depth(rankings, k)
    missing = [r.query_id for r in rankings if r.query_id not in query_categories]
    if missing:
        raise DataError(f"queries without a category: {sorted(missing)}")
    count = 0
    for ranking in rankings:
        category = query_categories[ranking.query_id]
        count += sum(1 for i in ranking.top(k) if item_categories[int(i)] == category)
    return count / (len(rankings) * k)


__all__ = ["hit_ratio", "lr_at_k", "cr_at_k"]
