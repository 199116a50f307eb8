from __future__ import annotations

import math

import numpy as np
import pytest

from config.config import AugmentationConfig, EncoderConfig, StageTrainingConfig
from Src.common.errors import DataError, DegenerateVectorError, ProvenanceError
from Src.common.io import read_jsonl
from Src.encoder.augment import augment, augment_batch
from Src.encoder.extract import encode_catalog
from Src.encoder.losses import (
    in_batch_contrastive,
    s1_batch_loss,
    s2_batch_loss,
    sample_s2_negatives,
)
from Src.encoder.model import EncoderModel
from Src.encoder.pool import build_negative_pool
from Src.encoder.training import StageData, init_encoder, train_stage
from Src.numerics.gradcheck import check_gradients
from Src.numerics.tensor import Tensor
from tests.helpers import make_catalog

ENCODER = EncoderConfig(embedding_dim=4, hidden_sizes=[6])


def _unit(rows: np.ndarray) -> Tensor:
    return Tensor(rows / np.linalg.norm(rows, axis=1, keepdims=True))


def test_identical_anchor_and_positive_pair_gives_log_two():
    v = _unit(np.array([[1.0, 0.0], [1.0, 0.0]]))
    loss = in_batch_contrastive(v, v).data
    assert np.allclose(loss, math.log(2), atol=1e-12)


def test_uniform_batch_gives_log_batch_size():
    for batch in (2, 4, 8):
        v = _unit(np.ones((batch, 3)))
        assert np.allclose(in_batch_contrastive(v, v).data, math.log(batch), atol=1e-9)


def test_including_the_anchor_adds_its_self_similarity():
    rng = np.random.default_rng(0)
    anchors = _unit(rng.standard_normal((5, 4)))
    positives = _unit(rng.standard_normal((5, 4)))
    strict = in_batch_contrastive(anchors, positives).data
    literal = in_batch_contrastive(anchors, positives, include_anchor=True).data
    pos = np.sum(anchors.data * positives.data, axis=1)
    gram = anchors.data @ anchors.data.T
    expected = np.log(np.exp(pos) + np.exp(gram).sum(axis=1)) - pos
    assert np.allclose(literal, expected, atol=1e-12)
    assert np.all(literal > strict)


def test_augmentation_keeps_shape_and_is_seeded():
    cfg = AugmentationConfig()
    image = np.random.default_rng(1).standard_normal(12)
    first = augment(image, cfg, np.random.default_rng(5))
    second = augment(image, cfg, np.random.default_rng(5))
    assert first.shape == image.shape
    assert np.array_equal(first, second)
    assert not np.array_equal(first, image)


def test_identity_augmentation_returns_the_image():
    image = np.arange(1.0, 7.0)
    assert np.array_equal(augment(image, AugmentationConfig.identity(), np.random.default_rng(0)), image)


def test_full_mask_is_degenerate():
    cfg = AugmentationConfig(mask_fraction=1.0, jitter_sigma=0.0, grey_prob=0.0, flip_prob=0.0)
    with pytest.raises(DegenerateVectorError):
        augment(np.ones(6), cfg, np.random.default_rng(0))


def test_mask_zeroes_the_configured_fraction():
    cfg = AugmentationConfig(mask_fraction=0.5, jitter_sigma=0.0, grey_prob=0.0, flip_prob=0.0)
    view = augment(np.ones(10), cfg, np.random.default_rng(2))
    assert int(np.sum(view == 0.0)) == 5


def test_greyscale_averages_each_pixel():
    cfg = AugmentationConfig(mask_fraction=0.0, jitter_sigma=0.0, grey_prob=1.0, flip_prob=0.0, channels=3)
    view = augment(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), cfg, np.random.default_rng(0))
    assert np.allclose(view, [2.0, 2.0, 2.0, 5.0, 5.0, 5.0])


def test_no_active_augmentation_rejected():
    with pytest.raises(ValueError):
        AugmentationConfig(mask_fraction=0.0, jitter_sigma=0.0, grey_prob=0.0, flip_prob=0.0)


def test_negative_pool_partitions_by_category():
    catalog = make_catalog([0, 1, 0, 2, 1, 0])
    pool = build_negative_pool(catalog)
    assert pool.members(0).tolist() == [0, 2, 5]
    assert len(pool) == 6
    assert build_negative_pool({7: 1, 3: 1}).members(1).tolist() == [3, 7]


def test_pool_too_small_names_the_category():
    pool = build_negative_pool(make_catalog([0, 0, 1]))
    with pytest.raises(DataError, match="category 1"):
        pool.require(1, 1)
    pool.require(0, 1)


def test_s2_negatives_stay_in_category_and_skip_the_click():
    categories = [i % 3 for i in range(60)]
    catalog = make_catalog(categories)
    pool = build_negative_pool(catalog)
    rng = np.random.default_rng(0)
    for _ in range(10_000 // 20):
        clicked = rng.integers(0, 60, size=20)
        negatives = sample_s2_negatives(clicked, catalog, pool, 5, rng)
        for item, row in zip(clicked, negatives):
            assert item not in row
            assert len(set(row.tolist())) == 5
            assert {categories[i] for i in row} == {categories[item]}


def _tiny_encoder(seed: int = 0, d_obs: int = 5) -> EncoderModel:
    return EncoderModel(d_obs, 3, [16], rng=np.random.default_rng(seed))


@pytest.mark.parametrize("seed", range(20))
def test_s1_loss_gradients(seed):
    model = _tiny_encoder(seed)
    images = np.random.default_rng(100 + seed).standard_normal((4, 5))
    cfg = AugmentationConfig(mask_fraction=0.2, jitter_sigma=0.1)

    def loss():
        return s1_batch_loss(model, images, cfg, np.random.default_rng(seed), temperature=0.5)

    assert check_gradients(loss, model.parameters()).passed()


@pytest.mark.parametrize("seed", range(20))
def test_s2_loss_gradients(seed):
    model = _tiny_encoder(seed)
    catalog = make_catalog([0, 1] * 6, dim=5, seed=seed)
    pool = build_negative_pool(catalog)
    queries = np.random.default_rng(200 + seed).standard_normal((3, 5))
    clicked = np.array([0, 3, 4])

    def loss():
        return s2_batch_loss(model, queries, clicked, catalog, pool, 3, np.random.default_rng(seed))

    assert check_gradients(loss, model.parameters()).passed()


def test_s1_needs_two_images():
    with pytest.raises(DataError):
        s1_batch_loss(_tiny_encoder(), np.ones((1, 5)), AugmentationConfig(), np.random.default_rng(0))


def _stage_data(dataset) -> StageData:
    return StageData.build(dataset.catalog, dataset.queries, dataset.events)


def test_zero_epochs_leaves_weights_and_curve_empty(tiny_dataset, tmp_path):
    model = init_encoder("s1", tiny_dataset.catalog.images.shape[1], ENCODER, seed=0)
    before = model.digest()
    result = train_stage(
        model,
        "s1",
        _stage_data(tiny_dataset),
        StageTrainingConfig(epochs=0),
        seed=0,
        encoder_cfg=ENCODER,
        checkpoint_path=tmp_path / "encoder_s1.ctrl",
    )
    assert result.losses == []
    assert model.digest() == before
    assert result.checkpoint_path.exists()


def test_training_is_deterministic_and_logs_every_step(tiny_dataset, tmp_path):
    shas = []
    for run in ("a", "b"):
        model = init_encoder("s1", tiny_dataset.catalog.images.shape[1], ENCODER, seed=3)
        result = train_stage(
            model,
            "s1",
            _stage_data(tiny_dataset),
            StageTrainingConfig(epochs=2, batch_size=32),
            seed=3,
            encoder_cfg=ENCODER,
            checkpoint_path=tmp_path / run / "encoder_s1.ctrl",
            loss_log_path=tmp_path / run / "loss_s1.jsonl",
        )
        shas.append(result.checkpoint_sha)
        rows = read_jsonl(tmp_path / run / "loss_s1.jsonl")
        assert len(rows) == result.steps
        assert set(rows[0]) == {"step", "loss", "components"}
    assert shas[0] == shas[1]


def test_s2_loss_decreases_over_training(tiny_dataset):
    model = init_encoder("s2", tiny_dataset.catalog.images.shape[1], ENCODER, seed=1)
    result = train_stage(
        model,
        "s2",
        _stage_data(tiny_dataset),
        StageTrainingConfig(epochs=15, batch_size=16, negatives_per_pair=5, learning_rate=0.1),
        seed=1,
        encoder_cfg=ENCODER,
    )
    per_epoch = np.array_split(np.array(result.losses), 15)
    assert np.mean(per_epoch[-1]) < np.mean(per_epoch[0])


def test_classifier_stage_trains_the_head(tiny_dataset):
    model = init_encoder("classifier", tiny_dataset.catalog.images.shape[1], ENCODER, seed=0, n_categories=3)
    result = train_stage(model, "classifier", _stage_data(tiny_dataset), StageTrainingConfig(epochs=1), seed=0)
    assert result.steps > 0
    assert model.head is not None


def test_s2_on_fresh_weights_rejects_an_s1_chain(tiny_dataset):
    model = init_encoder("s2", tiny_dataset.catalog.images.shape[1], ENCODER, seed=0)
    with pytest.raises(ProvenanceError):
        train_stage(
            model,
            "s2",
            _stage_data(tiny_dataset),
            StageTrainingConfig(epochs=1, negatives_per_pair=5),
            seed=0,
            expected_parent="s1",
        )


def test_s2_pool_precheck_fails_before_training(tiny_dataset):
    model = init_encoder("s2", tiny_dataset.catalog.images.shape[1], ENCODER, seed=0)
    with pytest.raises(DataError, match="category"):
        train_stage(
            model,
            "s2",
            _stage_data(tiny_dataset),
            StageTrainingConfig(epochs=1, negatives_per_pair=500),
            seed=0,
        )


def test_encode_catalog_is_unit_norm_and_chunk_independent():
    model = _tiny_encoder(4)
    # every hidden unit live for every row
    model.body.layers[0].bias.data[...] = 10.0
    images = np.random.default_rng(9).standard_normal((37, 5))
    ids = np.arange(100, 137)
    whole = encode_catalog(model, images, ids, chunk_size=512)
    chunked = encode_catalog(model, images, ids, chunk_size=5)
    assert np.allclose(np.linalg.norm(whole.vectors, axis=1), 1.0)
    assert np.allclose(whole.vectors, chunked.vectors, atol=1e-12)
    assert whole.ids.tolist() == ids.tolist()


def test_encode_catalog_names_degenerate_item():
    model = _tiny_encoder(0)
    for param in model.parameters():
        param.data[...] = 0.0
    with pytest.raises(DegenerateVectorError, match="item 42"):
        encode_catalog(model, np.ones((1, 5)), [42])


def test_augment_batch_rows_are_independent():
    cfg = AugmentationConfig()
    images = np.ones((3, 6))
    views = augment_batch(images, cfg, np.random.default_rng(0))
    assert views.shape == (3, 6)
    assert not np.array_equal(views[0], views[1])



@pytest.mark.parametrize("include_anchor", [False, True])
def test_in_batch_loss_follows_a_reordering_of_the_batch(include_anchor):
    rng = np.random.default_rng(11)
    anchors = rng.standard_normal((6, 4))
    positives = rng.standard_normal((6, 4))
    order = rng.permutation(6)
    base = in_batch_contrastive(_unit(anchors), _unit(positives), include_anchor=include_anchor).data
    moved = in_batch_contrastive(
        _unit(anchors[order]), _unit(positives[order]), include_anchor=include_anchor
    ).data
    assert np.allclose(moved, base[order], atol=1e-12)


def test_s2_loss_ignores_the_order_of_the_negatives(monkeypatch):
    import Src.encoder.losses as encoder_losses

    model = _tiny_encoder(2)
    catalog = make_catalog([0, 1] * 8, dim=5, seed=5)
    pool = build_negative_pool(catalog)
    queries = np.random.default_rng(12).standard_normal((3, 5))
    clicked = np.array([0, 3, 4])
    drawn = sample_s2_negatives(clicked, catalog, pool, 4, np.random.default_rng(0))
    base = s2_batch_loss(model, queries, clicked, catalog, pool, 4, np.random.default_rng(0)).data

    shuffled = drawn[:, ::-1].copy()
    monkeypatch.setattr(encoder_losses, "sample_s2_negatives", lambda *args: shuffled)
    moved = s2_batch_loss(model, queries, clicked, catalog, pool, 4, np.random.default_rng(0)).data
    assert moved == pytest.approx(float(base), abs=1e-12)
