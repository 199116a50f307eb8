"""Contrastive and cross-entropy losses shared by every training stage."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from Src.common.errors import DataError, InvalidProbabilityError, ShapeError
from Src.numerics import ops
from Src.numerics.tensor import DTYPE, Tensor


def info_nce(
    positive_logits: Tensor,
    negative_logits: Tensor,
    negative_mask: np.ndarray | None = None,
) -> Tensor:
    """Per-anchor ``-log softmax`` of the positive among [positive, negatives].

    ``positive_logits`` has shape (B,), ``negative_logits`` (B, M). Masked-out
    negatives (False) are dropped from the denominator. Returns shape (B,).
    """
    if positive_logits.ndim != 1 or negative_logits.ndim != 2:
        raise ShapeError(
            f"info_nce expects (B,) and (B, M), got {positive_logits.shape} "
            f"and {negative_logits.shape}"
        )
    batch = positive_logits.shape[0]
    if negative_logits.shape[0] != batch:
        raise ShapeError("positive and negative logits disagree on batch size")
    logits = ops.concat([ops.reshape(positive_logits, (batch, 1)), negative_logits], axis=1)
    mask = None
    if negative_mask is not None:
        negative_mask = np.asarray(negative_mask, dtype=bool)
        if negative_mask.shape != negative_logits.shape:
            raise ShapeError("negative mask shape does not match negative logits")
        mask = np.concatenate([np.ones((batch, 1), dtype=bool), negative_mask], axis=1)
    return ops.sub(ops.logsumexp(logits, axis=1, mask=mask), positive_logits)


def contrastive_loss(
    anchor: Tensor,
    positive: Tensor,
    negatives: Sequence[Tensor],
    temperature: float = 1.0,
) -> Tensor:
    """InfoNCE with cosine similarity for one anchor.

    ``-log(exp(g(a,p)/τ) / (exp(g(a,p)/τ) + Σ_j exp(g(a,n_j)/τ)))``
    """
    if not negatives:
        raise DataError("contrastive_loss needs at least one negative")
    if temperature <= 0:
        raise DataError(f"temperature must be positive, got {temperature}")
    anchor, positive = ops.as_tensor(anchor), ops.as_tensor(positive)
    dim = anchor.shape[-1]
    if positive.shape != (dim,) or any(ops.as_tensor(n).shape != (dim,) for n in negatives):
        raise ShapeError("anchor, positive and negatives must share dimension D")
    a = ops.l2_normalize(anchor)
    p = ops.l2_normalize(positive)
    n = ops.l2_normalize(ops.stack(list(negatives), axis=0))
    pos = ops.scale(ops.rowdot(a, p), 1.0 / temperature)
    neg = ops.scale(ops.matmul(n, ops.reshape(a, (dim, 1))), 1.0 / temperature)
    per_anchor = info_nce(ops.reshape(pos, (1,)), ops.reshape(neg, (1, len(negatives))))
    return ops.reshape(per_anchor, ())


def bce_loss(y_hat: Tensor, y: float | np.ndarray) -> Tensor:
    """``-[y ln ŷ + (1-y) ln(1-ŷ)]`` elementwise; ŷ must lie strictly in (0, 1)."""
    y_hat = ops.as_tensor(y_hat)
    if np.any(y_hat.data <= 0.0) or np.any(y_hat.data >= 1.0):
        raise InvalidProbabilityError("bce_loss needs predictions strictly inside (0, 1)")
    target = np.broadcast_to(np.asarray(y, dtype=DTYPE), y_hat.shape)
    pos = ops.mul(target, ops.log(y_hat))
    neg = ops.mul(1.0 - target, ops.log(ops.sub(1.0, y_hat)))
    return ops.scale(ops.add(pos, neg), -1.0)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean multiclass cross-entropy for (B, C) logits and integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("softmax_cross_entropy expects (B, C) logits and (B,) labels")
    one_hot = np.zeros(logits.shape, dtype=DTYPE)
    one_hot[np.arange(labels.size), labels] = 1.0
    picked = ops.sum(ops.mul(logits, one_hot), axis=1)
    return ops.mean(ops.sub(ops.logsumexp(logits, axis=1), picked))


__all__ = ["info_nce", "contrastive_loss", "bce_loss", "softmax_cross_entropy"]
