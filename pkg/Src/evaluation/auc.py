"""ROC AUC by rank sum, overall and restricted to impression buckets."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from typing import Literal

import numpy as np
from scipy.stats import rankdata

from config.logger_config import logger
from Src.common.errors import DataError, UndefinedMetricError

Bucket = Literal["bottom", "top"]


def auc(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    """Probability a random positive outscores a random negative; ties count half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be matching 1-D arrays")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = int(scores.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC needs both classes (got {n_pos} positives, {n_neg} negatives)"
        )
    ranks = rankdata(scores, method="average")
    u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def bucket_items(
    item_ids: Sequence[int] | np.ndarray,
    impressions: Mapping[int, int],
    bucket: Bucket,
    fraction: float = 0.1,
) -> set[int]:
    """The ``ceil(fraction * n)`` distinct items at one end of the impression order.

    Bottom sorts by (impressions asc, id asc), top by (impressions desc, id asc).
    """
    ids = np.unique(np.asarray(item_ids, dtype=np.int64))
    missing = [int(i) for i in ids if int(i) not in impressions]
    if missing:
        raise DataError(f"no impression count for items {missing[:5]}")
    counts = np.array([impressions[int(i)] for i in ids], dtype=np.int64)
    if bucket == "bottom":
        order = np.lexsort((ids, counts))
    elif bucket == "top":
        order = np.lexsort((ids, -counts))
    else:
        raise DataError(f"unknown bucket '{bucket}'")
    size = math.ceil(fraction * ids.shape[0])
    return {int(i) for i in ids[order[:size]]}


def auc_bucketed(
    scores: Sequence[float] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    item_ids: Sequence[int] | np.ndarray,
    impressions: Mapping[int, int],
    bucket: Bucket,
    fraction: float = 0.1,
) -> float | None:
    """AUC over events whose item is in the bucket; None when the bucket is single-class."""
    item_ids = np.asarray(item_ids, dtype=np.int64)
    members = bucket_items(item_ids, impressions, bucket, fraction)
    keep = np.array([int(i) in members for i in item_ids], dtype=bool)
    try:
        return auc(np.asarray(scores)[keep], np.asarray(labels)[keep])
    except UndefinedMetricError as exc:
        logger.warning("%s-bucket AUC undefined: %s", bucket, exc)
        return None


__all__ = ["Bucket", "auc", "bucket_items", "auc_bucketed"]
