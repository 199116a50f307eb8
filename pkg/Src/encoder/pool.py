from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from Src.common.errors import DataError
from Src.dataset.types import CatalogArrays


@dataclass(slots=True)
class NegativePool:
    """Item ids per category, each array sorted ascending."""

    pools: dict[int, np.ndarray]

    def __len__(self) -> int:
        return sum(int(ids.shape[0]) for ids in self.pools.values())

    def members(self, category: int) -> np.ndarray:
        return self.pools.get(int(category), np.zeros(0, dtype=np.int64))

    def require(self, category: int, negatives: int) -> None:
        size = self.members(category).shape[0]
        if size < negatives + 1:
            raise DataError(
                f"category {category} has {size} items; {negatives} negatives "
                f"per pair need at least {negatives + 1}"
            )

    def sample(
        self,
        category: int,
        exclude_id: int,
        negatives: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Draw ``negatives`` distinct same-category ids other than ``exclude_id``."""
        self.require(category, negatives)
        members = self.members(category)
        candidates = members[members != exclude_id]
        if candidates.shape[0] < negatives:
            raise DataError(
                f"category {category} cannot supply {negatives} negatives "
                f"besides item {exclude_id}"
            )
        return rng.choice(candidates, size=negatives, replace=False)


def build_negative_pool(catalog: CatalogArrays | Mapping[int, int]) -> NegativePool:
    """Partition item ids by category.

    Accepts catalog columns or a plain ``item_id -> category_id`` mapping.
    """
    if isinstance(catalog, CatalogArrays):
        ids, categories = catalog.ids, catalog.categories
    else:
        ids = np.fromiter(catalog.keys(), dtype=np.int64, count=len(catalog))
        categories = np.fromiter(catalog.values(), dtype=np.int64, count=len(catalog))
    pools = {
        int(c): np.sort(ids[categories == c])
        for c in np.unique(categories)
    }
    return NegativePool(pools)


__all__ = ["NegativePool", "build_negative_pool"]
