"""Exposure-biased impression and click simulation."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import replace

import numpy as np
from scipy.special import expit

from config.config import GeneratorConfig
from config.logger_config import logger
from Src.common.errors import DataError
from Src.common.seeding import substream
from Src.dataset.types import ClickEvent, Item, Query


def latent_cosines(query_latent: np.ndarray, item_latents: np.ndarray) -> np.ndarray:
    q = query_latent / np.linalg.norm(query_latent)
    p = item_latents / np.linalg.norm(item_latents, axis=1, keepdims=True)
    return p @ q


def exposure_order(
    weights: np.ndarray,
    slots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample ``slots`` distinct rows with probability proportional to ``weights``.

    Gumbel-top-k: perturbed log-weights sorted descending give a draw
    without replacement, and the sorted order is the display position.
    """
    with np.errstate(divide="ignore"):
        keys = np.log(weights) + rng.gumbel(size=weights.shape[0])
    slots = min(slots, weights.shape[0])
    top = np.argpartition(-keys, slots - 1)[:slots]
    return top[np.argsort(-keys[top], kind="stable")]


def _simulate_query(
    query: Query,
    cosines: np.ndarray,
    exposure_weights: np.ndarray,
    item_ids: np.ndarray,
    cfg: GeneratorConfig,
) -> list[ClickEvent]:
    rng = substream(cfg.seed, "traffic", "query", query.query_id)
    click_relevance = expit(cfg.relevance_gain * cosines + cfg.click_bias)
    events: list[ClickEvent] = []
    for _ in range(cfg.sessions_per_query):
        user_id = int(rng.integers(cfg.n_users))
        context_id = int(rng.integers(cfg.n_contexts))
        day = int(rng.integers(cfg.n_days))
        shown = exposure_order(exposure_weights, cfg.slots_per_query, rng)
        decay = cfg.position_decay ** np.arange(shown.shape[0])
        p_click = click_relevance[shown] * decay
        clicked = rng.random(shown.shape[0]) < p_click
        for position, (row, hit) in enumerate(zip(shown, clicked)):
            events.append(
                ClickEvent(
                    query_id=query.query_id,
                    user_id=user_id,
                    item_id=int(item_ids[row]),
                    position=position,
                    clicked=int(hit),
                    context_id=context_id,
                    day=day,
                )
            )
    return events


def simulate_traffic(
    items: Sequence[Item],
    queries: Sequence[Query],
    cfg: GeneratorConfig,
) -> list[ClickEvent]:
    """Log impressions and clicks, updating each item's counters in place.

    Every query draws from its own stream keyed by ``(seed, query_id)`` and
    the per-query logs are concatenated in query_id order.
    """
    if not items:
        raise DataError("cannot simulate traffic over an empty catalog")
    item_ids = np.array([it.item_id for it in items], dtype=np.int64)
    latents = np.stack([it.latent_style for it in items])
    popularity = np.array([it.popularity for it in items], dtype=np.float64)

    events: list[ClickEvent] = []
    for query in sorted(queries, key=lambda q: q.query_id):
        cosines = latent_cosines(query.latent_style, latents)
        relevance = (1.0 + cosines) / 2.0
        weights = popularity * relevance ** cfg.exposure_relevance_power
        events.extend(_simulate_query(query, cosines, weights, item_ids, cfg))

    by_id = {it.item_id: it for it in items}
    for it in items:
        it.impressions = 0
        it.clicks = 0
    for event in events:
        target = by_id[event.item_id]
        target.impressions += 1
        target.clicks += event.clicked

    n_clicks = sum(e.clicked for e in events)
    logger.info(
        "Simulated %d impressions and %d clicks for %d queries",
        len(events),
        n_clicks,
        len(queries),
    )
    return events


def low_impression_set(items: Iterable[Item], threshold: float) -> set[int]:
    """Items shown fewer than ``threshold`` times."""
    return {it.item_id for it in items if it.impressions < threshold}


def recount_exposure(items: Sequence[Item], events: Iterable[ClickEvent]) -> list[Item]:
    """Copies of ``items`` whose impressions and clicks count only ``events``."""
    impressions: Counter[int] = Counter()
    clicks: Counter[int] = Counter()
    for event in events:
        impressions[event.item_id] += 1
        clicks[event.item_id] += event.clicked
    return [
        replace(it, impressions=impressions[it.item_id], clicks=clicks[it.item_id])
        for it in items
    ]


def split_by_day(
    events: Sequence[ClickEvent],
    n_days: int,
    test_days: int,
) -> tuple[list[ClickEvent], list[ClickEvent]]:
    """Train on every day before the last ``test_days``; test on the rest."""
    boundary = n_days - test_days
    train = [e for e in events if e.day < boundary]
    test = [e for e in events if e.day >= boundary]
    return train, test


__all__ = [
    "latent_cosines",
    "exposure_order",
    "simulate_traffic",
    "low_impression_set",
    "recount_exposure",
    "split_by_day",
]
