from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from Src.common.errors import DataError, DebiasInactiveError, ShapeError
from Src.debias.network import DebiasModel, debias_forward
from Src.numerics import ops
from Src.numerics.losses import info_nce
from Src.numerics.tensor import Tensor


@dataclass(slots=True)
class DebiasLoss:
    value: Tensor
    used: int
    skipped: int

    @property
    def skip_rate(self) -> float:
        total = self.used + self.skipped
        return self.skipped / total if total else 0.0


def l_d(
    model: DebiasModel,
    anchor_v_s2: np.ndarray | Tensor,
    positive_v_s2: np.ndarray | Tensor,
    has_positive: np.ndarray,
    *,
    temperature: float = 1.0,
    include_anchor: bool = False,
) -> DebiasLoss:
    """Contrast each anchor's debiased feature with its mined positive.

    Rows of ``positive_v_s2`` are read only where ``has_positive`` is set.
    Negatives for anchor p are the debiased features of every other anchor
    in the batch. v^D is normalised before any cosine.
    """
    anchors = ops.as_tensor(anchor_v_s2)
    has_positive = np.asarray(has_positive, dtype=bool)
    batch = anchors.shape[0]
    if anchors.ndim != 2 or has_positive.shape != (batch,):
        raise ShapeError("l_d expects (B, D) anchors and a (B,) positive mask")
    if batch < 2:
        raise DataError("l_d needs at least two anchors for in-batch negatives")
    used = np.flatnonzero(has_positive)
    if used.size == 0:
        raise DebiasInactiveError(f"all {batch} anchors in the batch lack a mined positive")

    positives = np.asarray(ops.as_tensor(positive_v_s2).data)[used]
    v_d = ops.l2_normalize(debias_forward(model, anchors))
    v_d_used = ops.take_rows(v_d, used)
    v_pos = ops.l2_normalize(debias_forward(model, positives))
    pos = ops.scale(ops.rowdot(v_d_used, v_pos), 1.0 / temperature)
    neg = ops.scale(ops.matmul(v_d_used, ops.transpose(v_d)), 1.0 / temperature)
    mask = None
    if not include_anchor:
        mask = np.ones((used.size, batch), dtype=bool)
        mask[np.arange(used.size), used] = False
    value = ops.mean(info_nce(pos, neg, mask))
    return DebiasLoss(value=value, used=int(used.size), skipped=int(batch - used.size))


__all__ = ["DebiasLoss", "l_d"]
