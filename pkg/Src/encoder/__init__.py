"""Visual encoder: augmentation, stage losses, training and extraction."""

from __future__ import annotations

from Src.encoder.augment import augment, augment_batch
from Src.encoder.extract import encode_catalog
from Src.encoder.losses import classifier_batch_loss, s1_batch_loss, s2_batch_loss
from Src.encoder.model import EncoderModel
from Src.encoder.pool import NegativePool, build_negative_pool
from Src.encoder.training import StageData, StageResult, init_encoder, train_stage

__all__ = [
    "augment",
    "augment_batch",
    "encode_catalog",
    "classifier_batch_loss",
    "s1_batch_loss",
    "s2_batch_loss",
    "EncoderModel",
    "NegativePool",
    "build_negative_pool",
    "StageData",
    "StageResult",
    "init_encoder",
    "train_stage",
]
