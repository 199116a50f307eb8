"""Joint training of the CTR tower and the debias network."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from config.config import CtrConfig, DebiasConfig
from config.logger_config import logger
from Src.common.errors import DataError, DebiasInactiveError, UndefinedMetricError
from Src.common.io import write_jsonl
from Src.common.seeding import substream
from Src.ctr.features import SampleBatch, TrainSample
from Src.ctr.model import CtrPredictor
from Src.debias.loss import l_d
from Src.debias.mining import MinedPair, PositiveMiner
from Src.evaluation.auc import auc
from Src.numerics import ops
from Src.numerics.optim import Adagrad
from Src.numerics.tensor import Tape, Tensor, backward


@dataclass(slots=True)
class CtrLoss:
    total: Tensor
    pred: Tensor
    debias: Tensor | None = None
    used: int = 0
    skipped: int = 0

    def components(self) -> dict[str, float]:
        parts = {"l_pred": self.pred.item()}
        if self.debias is not None:
            parts["l_d"] = self.debias.item()
        return parts


def l_ctr(
    predictor: CtrPredictor,
    batch: SampleBatch,
    *,
    loss_weight: float = 1.0,
    mined: Mapping[int, MinedPair] | None = None,
    temperature: float = 1.0,
    include_anchor: bool = False,
) -> CtrLoss:
    """``mean bce + loss_weight * l_d`` over one batch.

    The debias term uses the batch's distinct items as anchors. It is left
    out when the weight is zero, no debias network is attached, or no
    anchor has a mined positive; skipped anchors are still counted.
    """
    if len(batch) < 2:
        raise DataError("a CTR batch needs at least two samples")
    logits = predictor.logits(batch)
    pred = ops.mean(ops.bce_with_logits(logits, batch.labels))
    if predictor.debias is None or loss_weight == 0.0 or mined is None:
        return CtrLoss(total=pred, pred=pred)

    anchors = np.unique(batch.item_ids)
    has_positive = np.array([int(a) in mined for a in anchors], dtype=bool)
    if anchors.shape[0] < 2 or not has_positive.any():
        return CtrLoss(total=pred, pred=pred, skipped=int(anchors.shape[0]))
    anchor_v = predictor.item_features.lookup(anchors)
    positive_ids = [mined[int(a)].positive_id if flag else int(a) for a, flag in zip(anchors, has_positive)]
    positive_v = predictor.item_features.lookup(positive_ids)
    debias = l_d(
        predictor.debias,
        anchor_v,
        positive_v,
        has_positive,
        temperature=temperature,
        include_anchor=include_anchor,
    )
    total = ops.add(pred, ops.scale(debias.value, loss_weight))
    return CtrLoss(
        total=total,
        pred=pred,
        debias=debias.value,
        used=debias.used,
        skipped=debias.skipped,
    )


@dataclass(slots=True)
class EpochMetrics:
    epoch: int
    loss: float
    l_pred: float
    l_d: float | None
    skip_rate: float | None
    train_auc: float | None
    validation_auc: float | None

    def as_dict(self) -> dict[str, float | int | None]:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "l_pred": self.l_pred,
            "l_d": self.l_d,
            "skip_rate": self.skip_rate,
            "train_auc": self.train_auc,
            "validation_auc": self.validation_auc,
        }


@dataclass(slots=True)
class CtrTrainResult:
    predictor: CtrPredictor
    epochs: list[EpochMetrics] = field(default_factory=list)
    steps: list[dict[str, object]] = field(default_factory=list)


def _safe_auc(predictor: CtrPredictor, batch: SampleBatch, what: str) -> float | None:
    if len(batch) == 0:
        return None
    try:
        return auc(predictor.predict(batch), batch.labels)
    except UndefinedMetricError as exc:
        logger.warning("%s AUC undefined: %s", what, exc)
        return None


def train_ctr(
    predictor: CtrPredictor,
    train: Sequence[TrainSample],
    cfg: CtrConfig,
    *,
    seed: int,
    debias_cfg: DebiasConfig | None = None,
    miner: PositiveMiner | None = None,
    validation: Sequence[TrainSample] = (),
    loss_log_path: Path | None = None,
) -> CtrTrainResult:
    """Adagrad over shuffled batches, one tape per step.

    Positives are mined once per epoch for every training item. An epoch
    whose skip rate reaches ``debias.max_skip_rate`` aborts the run.
    """
    if not train:
        raise DataError("cannot train the CTR model on an empty click log")
    debias_cfg = debias_cfg or DebiasConfig()
    debias_on = predictor.debias is not None and miner is not None
    optimizer = Adagrad(predictor.parameters(), cfg.learning_rate, cfg.epsilon)
    train_batch = SampleBatch.from_samples(train)
    valid_batch = SampleBatch.from_samples(list(validation))
    result = CtrTrainResult(predictor=predictor)

    logger.info(
        "Training CTR on %d samples (%d validation), debias %s, lambda %.3g",
        len(train_batch),
        len(valid_batch),
        "on" if debias_on else "off",
        debias_cfg.loss_weight,
    )
    for epoch in range(cfg.epochs):
        mined = miner.mine_epoch(train_batch.item_ids, epoch) if debias_on else None
        order = substream(seed, "ctr", "shuffle", epoch).permutation(len(train_batch))
        totals, preds, debiases = [], [], []
        used = skipped = 0
        for start in range(0, order.shape[0], cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            if rows.shape[0] < 2:
                continue
            with Tape() as tape:
                loss = l_ctr(
                    predictor,
                    train_batch.take(rows),
                    loss_weight=debias_cfg.loss_weight,
                    mined=mined,
                    temperature=debias_cfg.temperature,
                    include_anchor=debias_cfg.include_anchor_in_denominator,
                )
                ops.assert_finite(loss.total, "CTR loss")
                grads = backward(loss.total, tape)
            optimizer.step(grads)
            totals.append(loss.total.item())
            preds.append(loss.pred.item())
            if loss.debias is not None:
                debiases.append(loss.debias.item())
            used += loss.used
            skipped += loss.skipped
            result.steps.append(
                {"step": len(result.steps) + 1, "loss": totals[-1], "components": loss.components()}
            )

        skip_rate = None
        if debias_on and debias_cfg.loss_weight > 0:
            skip_rate = skipped / (used + skipped) if used + skipped else 1.0
            if skip_rate >= debias_cfg.max_skip_rate:
                raise DebiasInactiveError(
                    f"epoch {epoch + 1}: {skip_rate:.1%} of debias anchors had no mined positive "
                    f"(limit {debias_cfg.max_skip_rate:.0%})"
                )
        metrics = EpochMetrics(
            epoch=epoch + 1,
            loss=float(np.mean(totals)) if totals else float("nan"),
            l_pred=float(np.mean(preds)) if preds else float("nan"),
            l_d=float(np.mean(debiases)) if debiases else None,
            skip_rate=skip_rate,
            train_auc=_safe_auc(predictor, train_batch, "train"),
            validation_auc=_safe_auc(predictor, valid_batch, "validation"),
        )
        result.epochs.append(metrics)
        logger.info(
            "CTR epoch %d/%d loss %.5f train AUC %s validation AUC %s skip rate %s",
            epoch + 1,
            cfg.epochs,
            metrics.loss,
            metrics.train_auc,
            metrics.validation_auc,
            metrics.skip_rate,
        )
    if loss_log_path is not None:
        write_jsonl(loss_log_path, result.steps)
    return result


__all__ = ["CtrLoss", "l_ctr", "EpochMetrics", "CtrTrainResult", "train_ctr"]
