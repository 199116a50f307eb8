"""Desk-scale ablation orderings on the default synthetic benchmark.

These runs take minutes; they are deselected unless ``-m slow`` is given.
"""

from __future__ import annotations

import operator
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from App.ablation import TABLE_FILE, run_ablation
from App.manifest import read_manifest
from App.pipeline import MODES, run_dir
from config.config import load_config
from Src.dataset.generator import generate_catalog
from Src.dataset.types import CatalogArrays
from Src.encoder.extract import encode_catalog
from Src.encoder.training import StageData, init_encoder, train_stage
from Src.evaluation.report import REPORT_FILE, MetricReport

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
CLASSIFIER = "ResNetC-analog"


@pytest.fixture(scope="module")
def outputs(tmp_path_factory) -> dict[int, Path]:
    dirs = {}
    for seed in SEEDS:
        dirs[seed] = tmp_path_factory.mktemp(f"seed{seed}")
        run_ablation(load_config(seed=seed, output_dir=dirs[seed]))
    return dirs


@pytest.fixture(scope="module")
def matrix(outputs) -> dict[int, dict[str, MetricReport]]:
    return {
        seed: {mode: MetricReport.load(run_dir(load_config(seed=seed, output_dir=out), mode)) for mode in MODES}
        for seed, out in outputs.items()
    }


def _holds(
    matrix: dict[int, dict[str, MetricReport]],
    metric: Callable[[MetricReport], float],
    left: str,
    right: str,
    compare: Callable[[float, float], bool] = operator.gt,
) -> bool:
    """True on at least two of three seeds and on the seed mean."""
    lhs = [metric(matrix[s][left]) for s in SEEDS]
    rhs = [metric(matrix[s][right]) for s in SEEDS]
    wins = sum(compare(a, b) for a, b in zip(lhs, rhs))
    return wins >= 2 and compare(float(np.mean(lhs)), float(np.mean(rhs)))


def _hr(report: MetricReport) -> float:
    return report.hr


def _lr10(report: MetricReport) -> float:
    return report.lr_at[10]


def _cr10(report: MetricReport) -> float:
    return report.cr_at[10]


def _auc(report: MetricReport) -> float:
    return report.auc_overall


def _auc_bottom(report: MetricReport) -> float:
    return report.auc_bottom_decile


def test_two_stage_encoder_has_the_best_hit_ratio(matrix):
    assert _holds(matrix, _hr, "S1+S2", "S1")
    assert _holds(matrix, _hr, "S1+S2", "S2")


def test_classifier_baseline_has_the_lowest_hit_ratio(matrix):
    for other in ("S1", "S2", "S1+S2"):
        assert _holds(matrix, _hr, other, CLASSIFIER)


def test_classifier_baseline_has_the_highest_category_ratio(matrix):
    for other in ("S1", "S2", "S1+S2"):
        assert _holds(matrix, _cr10, CLASSIFIER, other)


def test_pretraining_keeps_low_impression_items_in_view(matrix):
    assert _holds(matrix, _lr10, "S1+S2", "S2", operator.ge)


def test_debias_lifts_the_bottom_decile_without_hurting_overall_auc(matrix):
    assert _holds(
        matrix,
        _auc_bottom,
        "S1+S2+D",
        "S1+S2",
        lambda a, b: a >= b - 0.002,
    )
    bottom_d = np.mean([_auc_bottom(matrix[s]["S1+S2+D"]) for s in SEEDS])
    bottom_base = np.mean([_auc_bottom(matrix[s]["S1+S2"]) for s in SEEDS])
    assert bottom_d > bottom_base
    assert _holds(
        matrix,
        _auc,
        "S1+S2+D",
        "S1+S2",
        lambda a, b: abs(a - b) <= 0.005,
    )


def test_click_finetuning_beats_pretraining_on_auc(matrix):
    assert _holds(matrix, _auc, "S2", "S1")


def test_debias_narrows_the_popularity_gap_on_every_seed(matrix):
    for seed in SEEDS:
        geometry = matrix[seed]["S1+S2+D"].geometry
        assert geometry is not None and geometry["narrowed"], seed


def test_ctr_checkpoints_point_at_their_final_encoder(outputs):
    for seed, out in outputs.items():
        cfg = load_config(seed=seed, output_dir=out)
        for mode, spec in MODES.items():
            chain = {e["artifact"]: e for e in read_manifest(run_dir(cfg, mode)).provenance}
            encoder = chain[f"encoder_{spec.final_stage}.ctrl"]
            assert chain["ctr.ctrl"]["parent_hash"] == encoder["sha256"], (seed, mode)


def test_rerun_is_byte_identical(outputs, tmp_path):
    original = outputs[SEEDS[0]]
    run_ablation(load_config(seed=SEEDS[0], output_dir=tmp_path))
    compared = [original / TABLE_FILE, *sorted(original.glob(f"runs/*/{REPORT_FILE}"))]
    assert len(compared) == 1 + len(MODES)
    for path in compared:
        rerun = tmp_path / path.relative_to(original)
        assert rerun.read_bytes() == path.read_bytes(), path


def _neighbour_agreement(vectors: np.ndarray, latents: np.ndarray) -> float:
    """Mean latent cosine between each item and its nearest embedding neighbour."""
    sims = vectors @ vectors.T
    np.fill_diagonal(sims, -np.inf)
    nearest = np.argmax(sims, axis=1)
    unit = latents / np.linalg.norm(latents, axis=1, keepdims=True)
    return float(np.mean(np.sum(unit * unit[nearest], axis=1)))


def test_pretraining_pulls_embedding_neighbours_towards_latent_neighbours():
    before, after = [], []
    for seed in SEEDS:
        cfg = load_config(seed=seed)
        items = generate_catalog(cfg.generator).items
        catalog = CatalogArrays(items)
        latents = np.stack([it.latent_style for it in items])
        model = init_encoder("s1", catalog.images.shape[1], cfg.encoder, seed)
        before.append(_neighbour_agreement(encode_catalog(model, catalog.images, catalog.ids).vectors, latents))
        train_stage(
            model,
            "s1",
            StageData.build(catalog),
            cfg.s1,
            seed=seed,
            encoder_cfg=cfg.encoder,
            augmentation=cfg.augmentation,
        )
        after.append(_neighbour_agreement(encode_catalog(model, catalog.images, catalog.ids).vectors, latents))
    assert sum(a > b for a, b in zip(after, before)) >= 2
    assert np.mean(after) > np.mean(before)
