"""Encoder stage training: classifier baseline, S1 pretraining, S2 finetuning."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from config.config import AugmentationConfig, EncoderConfig, StageTrainingConfig
from config.logger_config import logger
from Src.common.errors import ConfigError, DataError
from Src.common.io import write_jsonl
from Src.common.seeding import substream
from Src.dataset.types import CatalogArrays, ClickEvent, Query
from Src.encoder.losses import classifier_batch_loss, s1_batch_loss, s2_batch_loss
from Src.encoder.model import EncoderModel
from Src.encoder.pool import NegativePool, build_negative_pool
from Src.model.checkpoint import Provenance, require_stage
from Src.numerics.ops import assert_finite
from Src.numerics.optim import Adagrad
from Src.numerics.tensor import Tape, backward

ENCODER_STAGES = ("classifier", "s1", "s2")


@dataclass(slots=True)
class StageData:
    """Everything a stage may draw batches from.

    ``clicks`` holds ``(query_id, item_id)`` pairs of clicked impressions and
    is only read by S2.
    """

    catalog: CatalogArrays
    queries: dict[int, np.ndarray] = field(default_factory=dict)
    clicks: list[tuple[int, int]] = field(default_factory=list)
    n_categories: int | None = None

    @classmethod
    def build(
        cls,
        catalog: CatalogArrays,
        queries: Sequence[Query] = (),
        events: Sequence[ClickEvent] = (),
    ) -> "StageData":
        return cls(
            catalog=catalog,
            queries={q.query_id: q.image for q in queries},
            clicks=[(e.query_id, e.item_id) for e in events if e.clicked],
            n_categories=int(catalog.categories.max()) + 1 if len(catalog) else None,
        )


@dataclass(slots=True)
class StageResult:
    model: EncoderModel
    losses: list[float]
    checkpoint_sha: str | None = None
    checkpoint_path: Path | None = None

    @property
    def steps(self) -> int:
        return len(self.losses)


def init_encoder(
    stage: str,
    d_obs: int,
    cfg: EncoderConfig,
    seed: int,
    *,
    n_categories: int | None = None,
) -> EncoderModel:
    rng = substream(seed, stage, "init")
    heads = n_categories if stage == "classifier" else None
    return EncoderModel.from_config(d_obs, cfg, rng, n_categories=heads)


def _batches(order: np.ndarray, batch_size: int, minimum: int) -> list[np.ndarray]:
    chunks = [order[i:i + batch_size] for i in range(0, order.shape[0], batch_size)]
    return [c for c in chunks if c.shape[0] >= minimum]


def _check_s2_pools(data: StageData, pool: NegativePool, negatives: int) -> None:
    categories = {
        int(data.catalog.categories[data.catalog.row(item_id)]) for _, item_id in data.clicks
    }
    for category in sorted(categories):
        pool.require(category, negatives)


def train_stage(
    model: EncoderModel,
    stage: str,
    data: StageData,
    training: StageTrainingConfig,
    *,
    seed: int,
    encoder_cfg: EncoderConfig | None = None,
    augmentation: AugmentationConfig | None = None,
    expected_parent: str | None = None,
    checkpoint_path: Path | None = None,
    loss_log_path: Path | None = None,
) -> StageResult:
    """Train ``model`` in place for one stage and persist the result.

    ``expected_parent`` names the stage the incoming weights must come from
    (``"s1"`` for S2 in the chained mode). The returned curve has one entry
    per optimisation step.
    """
    if stage not in ENCODER_STAGES:
        raise ConfigError(f"unknown encoder stage '{stage}'")
    if expected_parent is not None:
        require_stage(model.provenance, expected_parent, f"stage {stage}")
    encoder_cfg = encoder_cfg or EncoderConfig()
    augmentation = augmentation or AugmentationConfig()
    if len(data.catalog) == 0:
        raise DataError("cannot train on an empty catalog")

    pool: NegativePool | None = None
    if stage == "s2":
        if not data.clicks:
            raise DataError("S2 needs at least one clicked impression")
        pool = build_negative_pool(data.catalog)
        _check_s2_pools(data, pool, training.negatives_per_pair)
    if stage == "classifier" and model.head is None:
        raise ConfigError("classifier stage needs an encoder with a category head")

    optimizer = Adagrad(model.parameters(), training.learning_rate, training.epsilon)
    losses: list[float] = []
    log_rows: list[dict[str, object]] = []
    parent_hash = model.source_sha

    logger.info(
        "Training stage %s: %d epochs, batch %d, lr %.3g",
        stage,
        training.epochs,
        training.batch_size,
        training.learning_rate,
    )
    for epoch in range(training.epochs):
        shuffle = substream(seed, stage, "batches", epoch)
        step_rng = substream(seed, stage, "augment", epoch)
        neg_rng = substream(seed, "s2", "negatives", epoch)
        if stage == "s2":
            order = shuffle.permutation(len(data.clicks))
            batches = _batches(order, training.batch_size, 1)
        else:
            order = shuffle.permutation(len(data.catalog))
            batches = _batches(order, training.batch_size, 2 if stage == "s1" else 1)
        if not batches:
            raise DataError(f"stage {stage} has no full batch to train on")

        epoch_losses = []
        for rows in batches:
            with Tape() as tape:
                if stage == "s1":
                    loss = s1_batch_loss(
                        model,
                        data.catalog.images[rows],
                        augmentation,
                        step_rng,
                        temperature=encoder_cfg.temperature,
                        include_anchor=encoder_cfg.include_anchor_in_denominator,
                    )
                elif stage == "s2":
                    pairs = [data.clicks[r] for r in rows]
                    try:
                        q_images = np.stack([data.queries[q] for q, _ in pairs])
                    except KeyError as exc:
                        raise DataError(f"click refers to unknown query {exc.args[0]}") from exc
                    loss = s2_batch_loss(
                        model,
                        q_images,
                        np.array([i for _, i in pairs], dtype=np.int64),
                        data.catalog,
                        pool,
                        training.negatives_per_pair,
                        neg_rng,
                        temperature=encoder_cfg.temperature,
                    )
                else:
                    loss = classifier_batch_loss(
                        model, data.catalog.images[rows], data.catalog.categories[rows]
                    )
                assert_finite(loss, f"{stage} loss")
                grads = backward(loss, tape)
            optimizer.step(grads)
            value = loss.item()
            losses.append(value)
            epoch_losses.append(value)
            log_rows.append({"step": len(losses), "loss": value, "components": {stage: value}})
            logger.debug("%s step %d loss %.6f", stage, len(losses), value)
        logger.info(
            "Stage %s epoch %d/%d mean loss %.6f",
            stage,
            epoch + 1,
            training.epochs,
            float(np.mean(epoch_losses)),
        )

    result = StageResult(model=model, losses=losses)
    if checkpoint_path is not None:
        result.checkpoint_sha = model.save(checkpoint_path, Provenance(stage, parent_hash))
        result.checkpoint_path = Path(checkpoint_path)
        logger.info("Saved %s checkpoint %s (%s)", stage, checkpoint_path, result.checkpoint_sha[:12])
    if loss_log_path is not None:
        write_jsonl(loss_log_path, log_rows)
    return result


__all__ = ["ENCODER_STAGES", "StageData", "StageResult", "init_encoder", "train_stage"]
