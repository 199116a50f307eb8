"""CTR predictor trained jointly with the debias network."""

from __future__ import annotations

from Src.ctr.features import FeatureVocab, SampleBatch, TrainSample, build_samples
from Src.ctr.model import CtrModel, CtrPredictor, assemble_input, predict
from Src.ctr.training import CtrTrainResult, l_ctr, train_ctr

__all__ = [
    "FeatureVocab",
    "SampleBatch",
    "TrainSample",
    "build_samples",
    "CtrModel",
    "CtrPredictor",
    "assemble_input",
    "predict",
    "CtrTrainResult",
    "l_ctr",
    "train_ctr",
]
