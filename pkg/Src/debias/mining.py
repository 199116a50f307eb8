"""Similarity-proportional positive mining for the debias loss."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from Src.common.io import write_jsonl
from Src.common.seeding import substream
from Src.dataset.types import CatalogArrays
from Src.debias.index import SimilarityIndex
from Src.model.embeddings import EmbeddingTable

DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True, slots=True)
class MinedPair:
    anchor_id: int
    positive_id: int
    sim: float
    epoch: int


def selection_probabilities(sims: np.ndarray, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Similarities clamped to ``floor`` and normalised to sum to one."""
    clamped = np.maximum(np.asarray(sims, dtype=np.float64), floor)
    return clamped / clamped.sum()


def draw_candidate(
    ids: np.ndarray,
    sims: np.ndarray,
    rng: np.random.Generator,
    floor: float = DEFAULT_FLOOR,
) -> tuple[int, float] | None:
    if ids.shape[0] == 0:
        return None
    pick = int(rng.choice(ids.shape[0], p=selection_probabilities(sims, floor)))
    return int(ids[pick]), float(sims[pick])


def mine_positive(
    anchor_id: int,
    anchor_vector: np.ndarray,
    category: int,
    index: SimilarityIndex,
    k: int,
    rng: np.random.Generator,
    *,
    floor: float = DEFAULT_FLOOR,
) -> tuple[int, float] | None:
    """One positive from the anchor's top-``k`` same-category neighbours, or None."""
    ids, sims = index.top_k(anchor_id, anchor_vector, category, k)
    return draw_candidate(ids, sims, rng, floor)


class PositiveMiner:
    """Caches every anchor's top-K candidates once; S1 embeddings never change.

    Each ``(epoch, anchor)`` draws from its own stream, so an anchor keeps one
    positive for the whole epoch whatever batch it lands in.
    """

    def __init__(
        self,
        index: SimilarityIndex,
        s1_embeddings: EmbeddingTable,
        catalog: CatalogArrays,
        *,
        k: int,
        seed: int,
        floor: float = DEFAULT_FLOOR,
    ) -> None:
        self.index = index
        self.k = k
        self.seed = seed
        self.floor = floor
        self.audit: list[MinedPair] = []
        self._candidates = self._precompute(s1_embeddings.normalized(), catalog)

    def _precompute(
        self,
        s1: EmbeddingTable,
        catalog: CatalogArrays,
    ) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        vectors = s1.lookup(catalog.ids)
        empty = (np.zeros(0, dtype=np.int64), np.zeros(0))
        cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for category in np.unique(catalog.categories):
            rows = np.flatnonzero(catalog.categories == category)
            shard = self.index.shards.get(int(category))
            if shard is None:
                cache.update({int(catalog.ids[r]): empty for r in rows})
                continue
            sims = vectors[rows] @ shard.vectors.T
            for r, row_sims in zip(rows, sims):
                anchor_id = int(catalog.ids[r])
                keep = shard.ids != anchor_id
                ids, kept = shard.ids[keep], row_sims[keep]
                order = np.lexsort((ids, -kept))[: self.k]
                cache[anchor_id] = (ids[order], kept[order])
        return cache

    def candidates(self, anchor_id: int) -> tuple[np.ndarray, np.ndarray]:
        return self._candidates[int(anchor_id)]

    def mine(self, anchor_id: int, epoch: int) -> MinedPair | None:
        ids, sims = self.candidates(anchor_id)
        drawn = draw_candidate(ids, sims, substream(self.seed, "mining", epoch, int(anchor_id)), self.floor)
        if drawn is None:
            return None
        return MinedPair(int(anchor_id), drawn[0], drawn[1], epoch)

    def mine_epoch(self, anchor_ids: Iterable[int], epoch: int) -> dict[int, MinedPair]:
        mined: dict[int, MinedPair] = {}
        for anchor_id in sorted({int(a) for a in anchor_ids}):
            pair = self.mine(anchor_id, epoch)
            if pair is not None:
                mined[anchor_id] = pair
                self.audit.append(pair)
        return mined

    def write_audit(self, path: Path) -> int:
        return write_jsonl(path, (asdict(pair) for pair in self.audit))


__all__ = [
    "DEFAULT_FLOOR",
    "MinedPair",
    "selection_probabilities",
    "draw_candidate",
    "mine_positive",
    "PositiveMiner",
]
