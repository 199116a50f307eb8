"""Batched stage losses for the encoder.

Each function records onto the active tape and returns a scalar tensor
equal to the mean of the per-anchor contrastive losses.
"""

from __future__ import annotations

import numpy as np

from config.config import AugmentationConfig
from Src.common.errors import DataError, ShapeError
from Src.dataset.types import CatalogArrays
from Src.encoder.augment import augment_batch
from Src.encoder.model import EncoderModel
from Src.encoder.pool import NegativePool
from Src.numerics import ops
from Src.numerics.losses import info_nce, softmax_cross_entropy
from Src.numerics.tensor import Tensor


def in_batch_contrastive(
    anchors: Tensor,
    positives: Tensor,
    *,
    temperature: float = 1.0,
    include_anchor: bool = False,
) -> Tensor:
    """Per-anchor InfoNCE where row i's negatives are the other anchors.

    Both inputs are (B, D) and already unit-norm. With ``include_anchor`` the
    self-similarity ``g(v_i, v_i)`` also enters row i's denominator.
    Returns shape (B,).
    """
    batch = anchors.shape[0]
    pos = ops.scale(ops.rowdot(anchors, positives), 1.0 / temperature)
    neg = ops.scale(ops.matmul(anchors, ops.transpose(anchors)), 1.0 / temperature)
    mask = None if include_anchor else ~np.eye(batch, dtype=bool)
    return info_nce(pos, neg, mask)


def s1_batch_loss(
    model: EncoderModel,
    images: np.ndarray,
    augmentation: AugmentationConfig,
    rng: np.random.Generator,
    *,
    temperature: float = 1.0,
    include_anchor: bool = False,
) -> Tensor:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 2 or images.shape[0] < 2:
        raise DataError("an S1 batch needs at least two images")
    views = augment_batch(images, augmentation, rng)
    anchors = model.embed(images)
    positives = model.embed(views)
    per_anchor = in_batch_contrastive(
        anchors, positives, temperature=temperature, include_anchor=include_anchor
    )
    return ops.mean(per_anchor)


def sample_s2_negatives(
    item_ids: np.ndarray,
    catalog: CatalogArrays,
    pool: NegativePool,
    negatives: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(B, m) same-category negative ids, never containing the clicked item."""
    rows = []
    for item_id in item_ids:
        category = int(catalog.categories[catalog.row(item_id)])
        drawn = pool.sample(category, int(item_id), negatives, rng)
        if np.any(drawn == item_id) or np.any(
            catalog.categories[catalog.rows(drawn)] != category
        ):
            raise DataError(f"negative draw for item {item_id} left category {category}")
        rows.append(drawn)
    return np.stack(rows)


def s2_batch_loss(
    model: EncoderModel,
    query_images: np.ndarray,
    item_ids: np.ndarray,
    catalog: CatalogArrays,
    pool: NegativePool,
    negatives: int,
    rng: np.random.Generator,
    *,
    temperature: float = 1.0,
) -> Tensor:
    """Queries against their clicked items, with negatives from the clicked item's category."""
    query_images = np.asarray(query_images, dtype=np.float64)
    item_ids = np.asarray(item_ids, dtype=np.int64)
    if query_images.ndim != 2 or query_images.shape[0] != item_ids.shape[0]:
        raise ShapeError("one query image per clicked item is required")
    if item_ids.shape[0] == 0:
        raise DataError("an S2 batch needs at least one click pair")
    batch = item_ids.shape[0]
    neg_ids = sample_s2_negatives(item_ids, catalog, pool, negatives, rng)

    q = model.embed(query_images)
    p = model.embed(catalog.images[catalog.rows(item_ids)])
    n = model.embed(catalog.images[catalog.rows(neg_ids.reshape(-1))])
    dim = model.embedding_dim
    n = ops.reshape(n, (batch, negatives, dim))
    pos = ops.scale(ops.rowdot(q, p), 1.0 / temperature)
    neg = ops.scale(
        ops.rowdot(ops.reshape(q, (batch, 1, dim)), n), 1.0 / temperature
    )
    return ops.mean(info_nce(pos, neg))


def classifier_batch_loss(
    model: EncoderModel,
    images: np.ndarray,
    categories: np.ndarray,
) -> Tensor:
    """Softmax cross-entropy of the category head."""
    if len(images) == 0:
        raise DataError("a classifier batch needs at least one image")
    return softmax_cross_entropy(model.classify(np.asarray(images)), np.asarray(categories))


__all__ = [
    "in_batch_contrastive",
    "s1_batch_loss",
    "sample_s2_negatives",
    "s2_batch_loss",
    "classifier_batch_loss",
]
