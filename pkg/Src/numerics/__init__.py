"""Dense tensors, reverse-mode differentiation, losses and Adagrad."""

from __future__ import annotations

from Src.numerics import ops
from Src.numerics.losses import bce_loss, contrastive_loss, info_nce, softmax_cross_entropy
from Src.numerics.optim import Adagrad, AdagradState, adagrad_step
from Src.numerics.tensor import Parameter, Tape, Tensor, backward, no_grad

matmul = ops.matmul
relu = ops.relu
tanh = ops.tanh
sigmoid = ops.sigmoid
l2_normalize = ops.l2_normalize
cosine_sim = ops.cosine_sim

__all__ = [
    "ops",
    "Tensor",
    "Parameter",
    "Tape",
    "backward",
    "no_grad",
    "matmul",
    "relu",
    "tanh",
    "sigmoid",
    "l2_normalize",
    "cosine_sim",
    "contrastive_loss",
    "info_nce",
    "bce_loss",
    "softmax_cross_entropy",
    "Adagrad",
    "AdagradState",
    "adagrad_step",
]
