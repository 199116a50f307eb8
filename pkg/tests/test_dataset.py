from __future__ import annotations

import json

import numpy as np
import pytest
from scipy.stats import spearmanr

from config.config import GeneratorConfig
from Src.common.errors import ConfigError, DataError, MissingArtifactError
from Src.dataset.generator import generate_catalog, generate_queries, recover_latents
from Src.dataset.relevance import annotate_relevance
from Src.dataset.storage import (
    DATA_FILES,
    DataDirectory,
    generate_dataset,
    read_items,
    write_dataset,
)
from Src.dataset.traffic import (
    exposure_order,
    low_impression_set,
    recount_exposure,
    simulate_traffic,
    split_by_day,
)
from Src.dataset.types import ClickEvent, Query
from tests.helpers import make_items


def _small(**overrides) -> GeneratorConfig:
    base = dict(
        n_items=200,
        n_queries=30,
        n_users=10,
        n_categories=3,
        d_latent=6,
        d_obs=12,
        slots_per_query=10,
        sessions_per_query=3,
        seed=11,
    )
    base.update(overrides)
    return GeneratorConfig(**base)


def test_identity_lift_without_noise_reproduces_latents():
    cfg = _small(d_obs=6, identity_lift=True, sigma_obs=0.0)
    for item in generate_catalog(cfg).items:
        assert np.array_equal(item.image, item.latent_style)


def test_identity_lift_needs_equal_dimensions():
    with pytest.raises(ConfigError):
        generate_catalog(_small(identity_lift=True))


def test_observation_dimension_below_latent_rejected():
    with pytest.raises(ConfigError):
        generate_catalog(_small(d_obs=4))


def test_noise_free_lift_is_invertible():
    bundle = generate_catalog(_small(sigma_obs=0.0))
    images = np.stack([it.image for it in bundle.items])
    latents = np.stack([it.latent_style for it in bundle.items])
    assert np.max(np.abs(recover_latents(images, bundle.truth.lift) - latents)) < 1e-9


def test_category_means_are_far_apart():
    means = generate_catalog(_small(n_categories=5, d_latent=16, d_obs=32)).truth.category_means
    cos = means @ means.T
    off = cos[~np.eye(5, dtype=bool)]
    assert np.all(off < 0.3)


def test_same_seed_same_catalog():
    first = generate_catalog(_small())
    second = generate_catalog(_small())
    for a, b in zip(first.items, second.items):
        assert np.array_equal(a.image, b.image)
        assert a.popularity == b.popularity
        assert a.category_id == b.category_id


def test_single_item_catalog_is_valid():
    data = generate_dataset(_small(n_items=1, n_queries=2, slots_per_query=3))
    assert len(data.items) == 1
    assert all(e.item_id == 0 for e in data.events)
    assert data.items[0].clicks <= data.items[0].impressions


def test_popularity_is_heavy_tailed():
    cfg = GeneratorConfig(n_items=10_000, n_queries=1, seed=3)
    popularity = np.sort([it.popularity for it in generate_catalog(cfg).items])[::-1]
    assert popularity[:1000].sum() / popularity.sum() > 0.5
    assert popularity.min() > 0


def test_queries_take_their_seed_item_category():
    cfg = _small(query_noise=0.0)
    bundle = generate_catalog(cfg)
    queries = generate_queries(cfg, bundle.items, bundle.truth)
    assert len(queries) == cfg.n_queries
    for query in queries:
        matches = [it for it in bundle.items if np.array_equal(it.latent_style, query.latent_style)]
        assert matches and matches[0].category_id == query.category_id


def test_clicks_never_exceed_impressions(tiny_dataset):
    total_impressions = sum(it.impressions for it in tiny_dataset.items)
    assert total_impressions == len(tiny_dataset.events)
    assert all(it.clicks <= it.impressions for it in tiny_dataset.items)
    assert sum(it.clicks for it in tiny_dataset.items) == sum(e.clicked for e in tiny_dataset.events)


def test_events_are_ordered_by_query_and_positions_restart():
    data = generate_dataset(_small())
    qids = [e.query_id for e in data.events]
    assert qids == sorted(qids)
    first = data.events[:10]
    assert [e.position for e in first] == list(range(10))


def test_saturated_click_model_clicks_everything():
    cfg = _small(relevance_gain=0.0, click_bias=60.0, position_decay=1.0)
    data = generate_dataset(cfg)
    assert data.events and all(e.clicked == 1 for e in data.events)


def test_exposure_order_is_distinct_and_follows_weights():
    rng = np.random.default_rng(0)
    weights = np.array([100.0, 1.0, 1.0, 1.0, 1e-9])
    firsts = [exposure_order(weights, 3, rng)[0] for _ in range(2000)]
    assert np.mean(np.array(firsts) == 0) > 0.9
    shown = exposure_order(weights, 10, rng)
    assert sorted(shown.tolist()) == [0, 1, 2, 3, 4]


def test_exposure_tracks_popularity_when_relevance_is_ignored():
    cfg = GeneratorConfig(
        n_items=10_000,
        n_queries=2000,
        relevance_gain=0.0,
        exposure_relevance_power=0.0,
        seed=5,
    )
    bundle = generate_catalog(cfg)
    queries = generate_queries(cfg, bundle.items, bundle.truth)
    simulate_traffic(bundle.items, queries, cfg)
    rho = spearmanr(
        [it.impressions for it in bundle.items], [it.popularity for it in bundle.items]
    ).statistic
    assert rho > 0.8


def test_default_traffic_is_exposure_biased():
    data = generate_dataset(GeneratorConfig(seed=1))
    impressions = np.array([it.impressions for it in data.items])
    popularity = np.array([it.popularity for it in data.items])
    clicks = np.array([it.clicks for it in data.items])
    result = spearmanr(impressions, popularity)
    assert result.statistic > 0 and result.pvalue < 0.01
    bottom = popularity <= np.quantile(popularity, 0.1)
    assert clicks[bottom].sum() < 0.02 * clicks.sum()


def test_empty_catalog_rejected():
    with pytest.raises(DataError):
        simulate_traffic([], [], _small())


def test_relevance_matches_pairwise_oracle():
    cfg = _small(relevance_threshold=0.6)
    data = generate_dataset(cfg)
    annotated = {a.query_id: a.relevant_item_ids for a in data.annotations}
    for query in data.queries:
        expected = set()
        for item in data.items:
            cos = query.latent_style @ item.latent_style / (
                np.linalg.norm(query.latent_style) * np.linalg.norm(item.latent_style)
            )
            if cos >= 0.6:
                expected.add(item.item_id)
        if expected:
            assert annotated[query.query_id] == expected
        else:
            assert query.query_id in data.dropped_queries


def test_relevance_threshold_extremes():
    items = make_items([0, 1, 0, 2])
    clone = Query(query_id=0, image=items[2].image, latent_style=items[2].latent_style.copy(), category_id=0)
    everything, dropped = annotate_relevance([clone], items, -1.0)
    assert everything[0].relevant_item_ids == {0, 1, 2, 3} and not dropped
    tight, _ = annotate_relevance([clone], items, 1.0 - 1e-9)
    assert 2 in tight[0].relevant_item_ids


def test_low_impression_set_matches_scan():
    items = make_items([0] * 6, impressions=[0, 4, 5, 6, 1, 5])
    assert low_impression_set(items, 5) == {0, 1, 4}
    assert low_impression_set(items, 0) == set()
    assert low_impression_set(items, float("inf")) == set(range(6))


def test_split_holds_out_last_days():
    events = [ClickEvent(0, 0, i, 0, 0, 0, day=i % 5) for i in range(10)]
    train, test = split_by_day(events, n_days=5, test_days=1)
    assert all(e.day < 4 for e in train) and all(e.day == 4 for e in test)
    assert len(train) + len(test) == 10


def test_recount_exposure_keeps_only_the_given_days():
    items = make_items([0, 0, 1], impressions=[7, 7, 7])
    events = [
        ClickEvent(0, 0, 0, 0, 1, 0, day=0),
        ClickEvent(0, 0, 0, 1, 0, 0, day=1),
        ClickEvent(1, 0, 1, 0, 1, 0, day=2),
    ]
    train, _ = split_by_day(events, n_days=3, test_days=1)
    seen = recount_exposure(items, train)
    assert [it.impressions for it in seen] == [2, 0, 0]
    assert [it.clicks for it in seen] == [1, 0, 0]
    assert low_impression_set(seen, 1) == {1, 2}
    assert [it.impressions for it in items] == [7, 7, 7]


def test_written_data_is_byte_identical_for_same_seed(tmp_path):
    cfg = _small()
    write_dataset(tmp_path / "a", generate_dataset(cfg))
    write_dataset(tmp_path / "b", generate_dataset(cfg))
    for name in DATA_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_written_counts_match_config(tmp_path):
    cfg = _small()
    data = generate_dataset(cfg)
    counts = write_dataset(tmp_path, data)
    assert counts["catalog.jsonl"] == cfg.n_items
    assert counts["queries.jsonl"] == cfg.n_queries
    assert counts["traffic.jsonl"] == cfg.n_queries * cfg.sessions_per_query * cfg.slots_per_query
    assert counts["relevance.jsonl"] == cfg.n_queries - len(data.dropped_queries)


def test_data_directory_reads_back(tmp_path):
    data = generate_dataset(_small())
    write_dataset(tmp_path, data)
    directory = DataDirectory(tmp_path)
    assert [it.item_id for it in directory.items] == [it.item_id for it in data.items]
    assert directory.events == data.events
    assert len(directory.catalog) == len(data.items)
    assert np.allclose(directory.items[0].image, data.items[0].image, atol=1e-6)


def test_catalog_with_more_clicks_than_impressions_rejected(tmp_path):
    items = make_items([0])
    items[0].clicks = 3
    items[0].impressions = 1
    (tmp_path / "catalog.jsonl").write_text(
        json.dumps(items[0].as_record()) + "\n", encoding="utf-8"
    )
    with pytest.raises(DataError):
        read_items(tmp_path)


def test_missing_data_directory(tmp_path):
    with pytest.raises(MissingArtifactError):
        DataDirectory(tmp_path / "nope")
