"""Synthetic catalog and query generation.

Items cluster around per-category latent means; observed images are the
latents pushed through one fixed random linear lift plus Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from config.config import GeneratorConfig
from config.logger_config import logger
from Src.common.errors import ConfigError
from Src.common.seeding import substream
from Src.dataset.types import GroundTruth, Item, Query

MAX_MEAN_DRAWS = 10_000


@dataclass(slots=True)
class CatalogBundle:
    items: list[Item]
    truth: GroundTruth


def _unit_rows(values: np.ndarray) -> np.ndarray:
    return values / np.linalg.norm(values, axis=-1, keepdims=True)


def draw_category_means(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit means whose pairwise cosine stays below ``max_category_cosine``."""
    means: list[np.ndarray] = []
    draws = 0
    while len(means) < cfg.n_categories:
        draws += 1
        if draws > MAX_MEAN_DRAWS:
            raise ConfigError(
                f"cannot place {cfg.n_categories} category means in {cfg.d_latent} "
                f"dimensions with pairwise cosine < {cfg.max_category_cosine}"
            )
        candidate = _unit_rows(rng.standard_normal(cfg.d_latent))
        if all(float(candidate @ m) < cfg.max_category_cosine for m in means):
            means.append(candidate)
    return np.stack(means)


def draw_lift(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.identity_lift:
        if cfg.d_obs != cfg.d_latent:
            raise ConfigError("identity_lift requires d_obs == d_latent")
        return np.eye(cfg.d_latent)
    return rng.standard_normal((cfg.d_latent, cfg.d_obs)) / np.sqrt(cfg.d_latent)


def observe(latents: np.ndarray, lift: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    images = latents @ lift
    if sigma > 0:
        images = images + sigma * rng.standard_normal(images.shape)
    return images


def generate_catalog(cfg: GeneratorConfig) -> CatalogBundle:
    if cfg.d_obs < cfg.d_latent:
        raise ConfigError(
            f"d_obs ({cfg.d_obs}) must be at least d_latent ({cfg.d_latent})"
        )
    means = draw_category_means(cfg, substream(cfg.seed, "generator", "categories"))
    lift = draw_lift(cfg, substream(cfg.seed, "generator", "lift"))

    rng = substream(cfg.seed, "generator", "items")
    categories = rng.integers(0, cfg.n_categories, size=cfg.n_items)
    styles = cfg.style_spread * rng.standard_normal((cfg.n_items, cfg.d_latent))
    latents = means[categories] + styles
    popularity = rng.pareto(cfg.pareto_shape, size=cfg.n_items) + cfg.popularity_floor
    images = observe(latents, lift, cfg.sigma_obs, rng)

    items = [
        Item(
            item_id=i,
            category_id=int(categories[i]),
            latent_style=latents[i],
            popularity=float(popularity[i]),
            image=images[i],
        )
        for i in range(cfg.n_items)
    ]
    logger.info(
        "Generated %d items over %d categories (d_latent=%d, d_obs=%d)",
        cfg.n_items,
        cfg.n_categories,
        cfg.d_latent,
        cfg.d_obs,
    )
    return CatalogBundle(items=items, truth=GroundTruth(lift=lift, category_means=means))


def generate_queries(
    cfg: GeneratorConfig,
    items: list[Item],
    truth: GroundTruth,
) -> list[Query]:
    """Each query perturbs a randomly chosen item's latent and keeps its category."""
    if not items:
        return []
    rng = substream(cfg.seed, "generator", "queries")
    seeds = rng.integers(0, len(items), size=cfg.n_queries)
    latents = np.stack([items[s].latent_style for s in seeds])
    if cfg.query_noise > 0:
        latents = latents + cfg.query_noise * rng.standard_normal(latents.shape)
    images = observe(latents, truth.lift, cfg.sigma_obs, rng)
    return [
        Query(
            query_id=q,
            image=images[q],
            latent_style=latents[q],
            category_id=items[int(seeds[q])].category_id,
        )
        for q in range(cfg.n_queries)
    ]


def recover_latents(images: np.ndarray, lift: np.ndarray) -> np.ndarray:
    """Invert the lift with its pseudo-inverse (exact when sigma_obs is 0)."""
    return np.asarray(images) @ np.linalg.pinv(lift)


__all__ = [
    "CatalogBundle",
    "draw_category_means",
    "draw_lift",
    "observe",
    "generate_catalog",
    "generate_queries",
    "recover_latents",
]
