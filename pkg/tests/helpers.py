from __future__ import annotations

import numpy as np

from Src.dataset.types import CatalogArrays, Item

TINY = {
    "seed": 7,
    "generator": {
        "n_items": 120,
        "n_queries": 24,
        "n_users": 12,
        "n_contexts": 3,
        "n_categories": 3,
        "d_latent": 6,
        "d_obs": 12,
        "slots_per_query": 10,
        "sessions_per_query": 3,
        "n_days": 3,
        "relevance_threshold": 0.8,
    },
    "encoder": {"embedding_dim": 8, "hidden_sizes": [16]},
    "classifier": {"epochs": 1, "batch_size": 32},
    "s1": {"epochs": 1, "batch_size": 32},
    "s2": {"epochs": 1, "batch_size": 32, "negatives_per_pair": 5},
    "debias": {
        "top_k": 5,
        "hidden_sizes": [16, 4, 16],
        "non_displayed_threshold": 2,
        "max_skip_rate": 1.0,
    },
    "ctr": {"tower_sizes": [16, 8], "embedding_width": 4, "epochs": 1, "batch_size": 64},
    "eval": {"k_values": [5, 10], "low_impression_threshold": 3},
}


def tiny_mapping(**overrides) -> dict:
    payload = {key: dict(value) if isinstance(value, dict) else value for key, value in TINY.items()}
    for section, values in overrides.items():
        if isinstance(values, dict):
            payload.setdefault(section, {}).update(values)
        else:
            payload[section] = values
    return payload


def make_items(
    categories: list[int],
    *,
    dim: int = 4,
    impressions: list[int] | None = None,
    seed: int = 0,
) -> list[Item]:
    rng = np.random.default_rng(seed)
    impressions = impressions or [0] * len(categories)
    return [
        Item(
            item_id=i,
            category_id=c,
            latent_style=rng.standard_normal(dim),
            popularity=1.0,
            image=rng.standard_normal(dim),
            impressions=impressions[i],
        )
        for i, c in enumerate(categories)
    ]


def make_catalog(categories: list[int], **kwargs) -> CatalogArrays:
    return CatalogArrays(make_items(categories, **kwargs))


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(value)


def write_tiny_toml(path, **overrides):
    """Write the tiny config as TOML; scalars first, then one table per section."""
    payload = tiny_mapping(**overrides)
    lines = [f"{k} = {_toml_value(v)}" for k, v in payload.items() if not isinstance(v, dict)]
    for section, values in payload.items():
        if isinstance(values, dict):
            lines.append(f"\n[{section}]")
            lines.extend(f"{k} = {_toml_value(v)}" for k, v in values.items())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
