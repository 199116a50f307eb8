"""Stage orchestration shared by the CLI and the ablation runner.

Output layout under ``cfg.output_dir``::

    data/                  generated catalog, queries, traffic, relevance, truth
    runs/<mode>/           checkpoints, embeddings, scores, report for one mode
    table.csv              the assembled ablation table
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np

from App.manifest import build_manifest, utc_now, write_manifest
from config.config import PipelineConfig, dump_resolved
from config.logger_config import logger
from Src.common.errors import (
    ConfigError,
    DataError,
    FrozenParameterError,
    MissingArtifactError,
    ProvenanceError,
    UndefinedMetricError,
)
from Src.common.io import read_json, read_jsonl, require_file, sha256_file, write_json, write_jsonl
from Src.common.seeding import substream
from Src.ctr.features import FeatureVocab, SampleBatch, build_samples
from Src.ctr.model import CtrModel, CtrPredictor
from Src.ctr.training import CtrTrainResult, train_ctr
from Src.dataset.storage import DATA_FILES, DataDirectory, generate_dataset, write_dataset
from Src.dataset.traffic import low_impression_set, recount_exposure, split_by_day
from Src.dataset.types import CatalogArrays, ClickEvent
from Src.debias.geometry import geometry_report, matched_pairs
from Src.debias.index import build_index
from Src.debias.mining import PositiveMiner
from Src.debias.network import DebiasModel
from Src.encoder.extract import encode_catalog
from Src.encoder.model import EncoderModel
from Src.encoder.training import StageData, StageResult, init_encoder, train_stage
from Src.evaluation.auc import auc, auc_bucketed
from Src.evaluation.ranking import rank_all
from Src.evaluation.report import MetricReport, render_table
from Src.evaluation.search_metrics import cr_at_k, hit_ratio, lr_at_k
from Src.model.checkpoint import Provenance, load_checkpoint, require_stage
from Src.model.embeddings import EmbeddingTable, read_embeddings, write_embeddings
from Src.model.model_cache import (
    ctr_checkpoint_name,
    embedding_name,
    encoder_checkpoint_name,
    find_local_checkpoint,
    require_checkpoint,
    safe_mode_dirname,
)

DATA_DIR = "data"
RUNS_DIR = "runs"
SCORES_FILE = "scores.jsonl"
EPOCHS_FILE = "ctr_epochs.jsonl"
GEOMETRY_FILE = "geometry.json"
PAIRS_FILE = "pairs.jsonl"
ROW_FILE = "table_row.csv"
FUSED = "fused"


@dataclass(frozen=True, slots=True)
class ModeSpec:
    """Encoder stages trained in order, and whether the debias network is attached."""

    name: str
    stages: tuple[str, ...]
    debias: bool = False

    @property
    def final_stage(self) -> str:
        return self.stages[-1]


MODES: dict[str, ModeSpec] = {
    spec.name: spec
    for spec in (
        ModeSpec("ResNetC-analog", ("classifier",)),
        ModeSpec("S1", ("s1",)),
        ModeSpec("S2", ("s2",)),
        ModeSpec("S1+S2", ("s1", "s2")),
        ModeSpec("S1+S2+D", ("s1", "s2"), debias=True),
    )
}
DEFAULT_MODE = "S1+S2+D"


def mode_spec(mode: str) -> ModeSpec:
    try:
        return MODES[mode]
    except KeyError:
        raise ConfigError(f"unknown mode '{mode}'; choose one of {', '.join(MODES)}") from None


def data_dir(cfg: PipelineConfig) -> Path:
    return Path(cfg.output_dir) / DATA_DIR


def run_dir(cfg: PipelineConfig, mode: str) -> Path:
    path = Path(cfg.output_dir) / RUNS_DIR / safe_mode_dirname(mode_spec(mode).name)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_data(cfg: PipelineConfig) -> DataDirectory:
    return DataDirectory(data_dir(cfg))


def _split(cfg: PipelineConfig, events: list[ClickEvent]) -> tuple[list[ClickEvent], list[ClickEvent]]:
    return split_by_day(events, cfg.generator.n_days, cfg.ctr.test_days)


def _provenance_chain(directory: Path) -> list[dict[str, Any]]:
    chain = []
    for path in sorted(directory.glob("*.ctrl")):
        checkpoint = load_checkpoint(path)
        chain.append(
            {"artifact": path.name, "sha256": checkpoint.sha256, **checkpoint.provenance.as_dict()}
        )
    return chain


def _finish_run(cfg: PipelineConfig, mode: str, started: datetime) -> None:
    directory = run_dir(cfg, mode)
    dump_resolved(cfg, directory)
    inputs = {
        name: data_dir(cfg) / name for name in DATA_FILES if (data_dir(cfg) / name).is_file()
    }
    manifest = build_manifest(
        directory,
        kind="run",
        mode=mode,
        seed=cfg.seed,
        started=started,
        inputs=inputs,
        provenance=_provenance_chain(directory),
    )
    write_manifest(directory, manifest)


def generate_data(cfg: PipelineConfig) -> Path:
    started = utc_now()
    target = data_dir(cfg)
    dataset = generate_dataset(cfg.generator)
    write_dataset(target, dataset)
    dump_resolved(cfg, target)
    write_manifest(target, build_manifest(target, kind="data", seed=cfg.seed, started=started))
    return target


def _encoder_for_stage(cfg: PipelineConfig, spec: ModeSpec, stage: str, data: DataDirectory) -> tuple[EncoderModel, str | None]:
    position = spec.stages.index(stage)
    if position == 0:
        n_categories = max(cfg.generator.n_categories, int(data.catalog.categories.max()) + 1)
        model = init_encoder(
            stage,
            int(data.catalog.images.shape[1]),
            cfg.encoder,
            cfg.seed,
            n_categories=n_categories,
        )
        return model, None
    parent = spec.stages[position - 1]
    path = find_local_checkpoint(run_dir(cfg, spec.name), parent)
    if path is None:
        raise ProvenanceError(
            f"stage {stage} in mode {spec.name} starts from a {parent} checkpoint; "
            f"'{encoder_checkpoint_name(parent)}' not found under {run_dir(cfg, spec.name)}"
        )
    return EncoderModel.load(path, with_head=False), parent


def train_encoder(cfg: PipelineConfig, mode: str, stage: str) -> StageResult:
    started = utc_now()
    spec = mode_spec(mode)
    if stage not in spec.stages:
        raise ConfigError(f"mode {spec.name} has no '{stage}' stage (stages: {', '.join(spec.stages)})")
    data = _load_data(cfg)
    train_events, _ = _split(cfg, data.events)
    model, parent = _encoder_for_stage(cfg, spec, stage, data)
    directory = run_dir(cfg, mode)
    result = train_stage(
        model,
        stage,
        StageData.build(data.catalog, data.queries, train_events),
        getattr(cfg, stage),
        seed=cfg.seed,
        encoder_cfg=cfg.encoder,
        augmentation=cfg.augmentation,
        expected_parent=parent,
        checkpoint_path=directory / encoder_checkpoint_name(stage),
        loss_log_path=directory / f"loss_{stage}.jsonl",
    )
    _finish_run(cfg, mode, started)
    return result


def _frozen_encoder(directory: Path, stage: str) -> tuple[EncoderModel, Path]:
    path = require_checkpoint(directory, stage)
    model = EncoderModel.load(path, with_head=False)
    model.freeze()
    return model, path


def _visual_tables(model: EncoderModel, data: DataDirectory) -> tuple[EmbeddingTable, EmbeddingTable]:
    catalog = data.catalog
    query_ids = np.array([q.query_id for q in data.queries], dtype=np.int64)
    query_images = np.stack([q.image for q in data.queries]) if data.queries else np.zeros((0, catalog.images.shape[1]))
    queries = encode_catalog(model, query_images, query_ids)
    items = encode_catalog(model, catalog.images, catalog.ids)
    return queries, items


def encode(cfg: PipelineConfig, mode: str) -> dict[str, Path]:
    """Write query and item embeddings for every encoder stage of the mode."""
    started = utc_now()
    spec = mode_spec(mode)
    data = _load_data(cfg)
    directory = run_dir(cfg, mode)
    written: dict[str, Path] = {}
    for stage in spec.stages:
        model, _ = _frozen_encoder(directory, stage)
        queries, items = _visual_tables(model, data)
        written[f"queries_{stage}"] = write_embeddings(directory / embedding_name(stage, "queries"), queries)
        written[f"items_{stage}"] = write_embeddings(directory / embedding_name(stage, "items"), items)
        logger.info("Encoded %d items and %d queries with the %s encoder", len(items), len(queries), stage)
    _finish_run(cfg, mode, started)
    return written


def train_ctr_stage(cfg: PipelineConfig, mode: str) -> CtrTrainResult:
    """Train the CTR model (and debias network) over the frozen final encoder."""
    started = utc_now()
    spec = mode_spec(mode)
    data = _load_data(cfg)
    directory = run_dir(cfg, mode)
    catalog = data.catalog

    encoder, encoder_path = _frozen_encoder(directory, spec.final_stage)
    encoder_sha = sha256_file(encoder_path)
    encoder_digest = encoder.encoder_digest()
    queries, items = _visual_tables(encoder, data)

    train_events, test_events = _split(cfg, data.events)
    if not train_events:
        raise DataError("no click events fall inside the training days")
    vocab = FeatureVocab.fit(train_events, catalog)
    ctr_model = CtrModel(
        vocab,
        encoder.embedding_dim,
        cfg.ctr.tower_sizes,
        substream(cfg.seed, "ctr", "init"),
        embedding_width=cfg.ctr.embedding_width,
    )

    debias = miner = index = s1_items = None
    # test days must not decide which items count as non-displayed
    seen = CatalogArrays(recount_exposure(data.items, train_events))
    if spec.debias:
        s1_encoder, _ = _frozen_encoder(directory, "s1")
        s1_items = encode_catalog(s1_encoder, catalog.images, catalog.ids)
        index = build_index(s1_items, seen, cfg.debias.non_displayed_threshold)
        miner = PositiveMiner(
            index,
            s1_items,
            seen,
            k=cfg.debias.top_k,
            seed=cfg.seed,
            floor=cfg.debias.similarity_floor,
        )
        debias = DebiasModel.from_config(
            encoder.embedding_dim, cfg.debias, substream(cfg.seed, "debias", "init")
        )

    predictor = CtrPredictor(ctr_model, queries, items, debias)
    result = train_ctr(
        predictor,
        build_samples(train_events, catalog),
        cfg.ctr,
        seed=cfg.seed,
        debias_cfg=cfg.debias,
        miner=miner,
        validation=build_samples(test_events, catalog),
        loss_log_path=directory / "loss_ctr.jsonl",
    )

    if encoder.encoder_digest() != encoder_digest or sha256_file(encoder_path) != encoder_sha:
        raise FrozenParameterError(f"{spec.final_stage} encoder changed during CTR training")

    predictor.save(
        directory / ctr_checkpoint_name(),
        Provenance("ctr", encoder_sha),
        encoder_stage=spec.final_stage,
        encoder_digest=encoder_digest,
    )
    write_jsonl(directory / EPOCHS_FILE, (m.as_dict() for m in result.epochs))
    if miner is not None and index is not None and s1_items is not None:
        miner.write_audit(directory / PAIRS_FILE)
        fused = predictor.fused_table()
        write_embeddings(directory / embedding_name(FUSED, "items"), fused)
        pairs = matched_pairs(seen, index, s1_items, fraction=cfg.eval.bucket_fraction)
        geometry = geometry_report(pairs, items, fused)
        write_json(directory / GEOMETRY_FILE, geometry.as_dict())
        logger.info(
            "Cosine gap over %d matched pairs: v_s2 %.4f, fused %.4f",
            geometry.pairs,
            geometry.gap_s2,
            geometry.gap_fused,
        )
    _finish_run(cfg, mode, started)
    return result


def load_predictor(cfg: PipelineConfig, mode: str, data: DataDirectory) -> CtrPredictor:
    directory = run_dir(cfg, mode)
    checkpoint = load_checkpoint(require_checkpoint(directory, "ctr"))
    require_stage(checkpoint.provenance, "ctr", "prediction")
    stage = str(checkpoint.metadata.get("encoder_stage", mode_spec(mode).final_stage))
    encoder, encoder_path = _frozen_encoder(directory, stage)
    if checkpoint.provenance.parent_hash != sha256_file(encoder_path):
        raise ProvenanceError(
            f"{ctr_checkpoint_name()} was trained on a different {stage} encoder checkpoint"
        )
    queries, items = _visual_tables(encoder, data)
    return CtrPredictor.from_checkpoint(checkpoint, queries, items)


def predict(cfg: PipelineConfig, mode: str) -> Path:
    """Score the held-out days and write ``scores.jsonl``."""
    started = utc_now()
    data = _load_data(cfg)
    predictor = load_predictor(cfg, mode, data)
    _, test_events = _split(cfg, data.events)
    if not test_events:
        raise DataError("no click events fall inside the held-out days")
    batch = SampleBatch.from_samples(build_samples(test_events, data.catalog))
    y_hat = predictor.predict(batch)
    rows = (
        {"query_id": int(q), "item_id": int(i), "y": int(y), "y_hat": float(p)}
        for q, i, y, p in zip(batch.query_ids, batch.item_ids, batch.labels, y_hat)
    )
    path = run_dir(cfg, mode) / SCORES_FILE
    count = write_jsonl(path, rows)
    logger.info("Wrote %d scores to %s", count, path)
    _finish_run(cfg, mode, started)
    return path


def _config_echo(cfg: PipelineConfig) -> dict[str, Any]:
    return {
        "seed": cfg.seed,
        "k_values": list(cfg.eval.k_values),
        "low_impression_threshold": cfg.eval.low_impression_threshold,
        "non_displayed_threshold": cfg.debias.non_displayed_threshold,
        "bucket_fraction": cfg.eval.bucket_fraction,
        "relevance_threshold": cfg.generator.relevance_threshold,
        "impression_window": "whole simulation",
        "debias_impression_window": "training days",
    }


def _save_report(cfg: PipelineConfig, mode: str, update: MetricReport) -> MetricReport:
    directory = run_dir(cfg, mode)
    try:
        current = MetricReport.load(directory)
    except MissingArtifactError:
        current = MetricReport(mode=mode)
    report = current.merged(update)
    report.save(directory)
    (directory / ROW_FILE).write_text(render_table([report], cfg.eval.k_values), encoding="utf-8")
    return report


def evaluate_search(cfg: PipelineConfig, mode: str) -> MetricReport:
    started = utc_now()
    spec = mode_spec(mode)
    data = _load_data(cfg)
    directory = run_dir(cfg, mode)
    final = spec.final_stage
    queries = read_embeddings(directory / embedding_name(final, "queries"))
    item_stage = FUSED if spec.debias else final
    items = read_embeddings(directory / embedding_name(item_stage, "items"))

    annotations = {a.query_id: a.relevant_item_ids for a in data.annotations}
    keep = np.array([int(q) in annotations for q in queries.ids], dtype=bool)
    if not keep.any():
        raise DataError("no ranked query has a relevance annotation")
    queries = EmbeddingTable(queries.ids[keep], queries.vectors[keep]).normalized()
    rankings = rank_all(queries, items.normalized())

    low = low_impression_set(data.items, cfg.eval.low_impression_threshold)
    query_categories = {q.query_id: q.category_id for q in data.queries}
    item_categories = {it.item_id: it.category_id for it in data.items}
    update = MetricReport(
        mode=mode,
        hr=hit_ratio(rankings, annotations),
        lr_at={k: lr_at_k(rankings, low, k) for k in cfg.eval.k_values},
        cr_at={k: cr_at_k(rankings, query_categories, item_categories, k) for k in cfg.eval.k_values},
        config=_config_echo(cfg),
    )
    report = _save_report(cfg, mode, update)
    logger.info("Search metrics for %s: HR %.4f, LR %s, CR %s", mode, report.hr, report.lr_at, report.cr_at)
    _finish_run(cfg, mode, started)
    return report


def evaluate_ctr(cfg: PipelineConfig, mode: str) -> MetricReport:
    started = utc_now()
    data = _load_data(cfg)
    directory = run_dir(cfg, mode)
    rows = read_jsonl(require_file(directory / SCORES_FILE, "CTR scores"))
    if not rows:
        raise DataError(f"{directory / SCORES_FILE} is empty")
    scores = np.array([r["y_hat"] for r in rows], dtype=np.float64)
    labels = np.array([r["y"] for r in rows], dtype=np.int64)
    item_ids = np.array([r["item_id"] for r in rows], dtype=np.int64)
    impressions = {it.item_id: it.impressions for it in data.items}

    try:
        overall: float | None = auc(scores, labels)
    except UndefinedMetricError as exc:
        logger.warning("Overall AUC undefined for %s: %s", mode, exc)
        overall = None
    fraction = cfg.eval.bucket_fraction
    fields: dict[str, Any] = {
        "mode": mode,
        "auc_overall": overall,
        "auc_bottom_decile": auc_bucketed(scores, labels, item_ids, impressions, "bottom", fraction),
        "auc_top_decile": auc_bucketed(scores, labels, item_ids, impressions, "top", fraction),
        "config": _config_echo(cfg),
    }
    epochs_path = directory / EPOCHS_FILE
    if epochs_path.is_file():
        epochs = read_jsonl(epochs_path)
        fields["auc_train"] = [e.get("train_auc") for e in epochs]
        fields["auc_validation"] = [e.get("validation_auc") for e in epochs]
    geometry_path = directory / GEOMETRY_FILE
    if geometry_path.is_file():
        fields["geometry"] = read_json(geometry_path)
    report = _save_report(cfg, mode, MetricReport(**fields))
    logger.info(
        "CTR metrics for %s: AUC %s, bottom %s, top %s",
        mode,
        report.auc_overall,
        report.auc_bottom_decile,
        report.auc_top_decile,
    )
    _finish_run(cfg, mode, started)
    return report


def run_mode(cfg: PipelineConfig, mode: str) -> MetricReport:
    """Every stage of one mode, from encoder training to the merged report."""
    spec = mode_spec(mode)
    logger.info("Running mode %s (stages: %s, debias %s)", spec.name, ", ".join(spec.stages), spec.debias)
    for stage in spec.stages:
        train_encoder(cfg, mode, stage)
    encode(cfg, mode)
    train_ctr_stage(cfg, mode)
    predict(cfg, mode)
    evaluate_search(cfg, mode)
    return evaluate_ctr(cfg, mode)


__all__ = [
    "ModeSpec",
    "MODES",
    "DEFAULT_MODE",
    "mode_spec",
    "data_dir",
    "run_dir",
    "generate_data",
    "train_encoder",
    "encode",
    "train_ctr_stage",
    "load_predictor",
    "predict",
    "evaluate_search",
    "evaluate_ctr",
    "run_mode",
]
