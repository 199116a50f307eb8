"""Reading and writing the generated data directory.

Files: ``catalog.jsonl``, ``queries.jsonl``, ``traffic.jsonl``,
``relevance.jsonl`` and the ``truth.jsonl`` sidecar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from config.config import GeneratorConfig
from config.logger_config import logger
from Src.common.errors import DataError
from Src.common.io import read_jsonl, require_file, write_json, write_jsonl
from Src.dataset.generator import generate_catalog, generate_queries
from Src.dataset.relevance import annotate_relevance
from Src.dataset.traffic import simulate_traffic
from Src.dataset.types import (
    CatalogArrays,
    ClickEvent,
    GroundTruth,
    Item,
    Query,
    RelevanceAnnotation,
)

CATALOG_FILE = "catalog.jsonl"
QUERIES_FILE = "queries.jsonl"
TRAFFIC_FILE = "traffic.jsonl"
RELEVANCE_FILE = "relevance.jsonl"
TRUTH_FILE = "truth.jsonl"
SUMMARY_FILE = "generation.json"

DATA_FILES = (CATALOG_FILE, QUERIES_FILE, TRAFFIC_FILE, RELEVANCE_FILE, TRUTH_FILE)


@dataclass(slots=True)
class SyntheticDataset:
    items: list[Item]
    queries: list[Query]
    events: list[ClickEvent]
    annotations: list[RelevanceAnnotation]
    dropped_queries: list[int] = field(default_factory=list)
    truth: GroundTruth | None = None

    @property
    def catalog(self) -> CatalogArrays:
        return CatalogArrays(self.items)


def generate_dataset(cfg: GeneratorConfig) -> SyntheticDataset:
    bundle = generate_catalog(cfg)
    queries = generate_queries(cfg, bundle.items, bundle.truth)
    events = simulate_traffic(bundle.items, queries, cfg)
    annotations, dropped = annotate_relevance(queries, bundle.items, cfg.relevance_threshold)
    return SyntheticDataset(
        items=bundle.items,
        queries=queries,
        events=events,
        annotations=annotations,
        dropped_queries=dropped,
        truth=bundle.truth,
    )


def write_dataset(directory: Path, data: SyntheticDataset) -> dict[str, int]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    counts = {
        CATALOG_FILE: write_jsonl(directory / CATALOG_FILE, (it.as_record() for it in data.items)),
        QUERIES_FILE: write_jsonl(directory / QUERIES_FILE, (q.as_record() for q in data.queries)),
        TRAFFIC_FILE: write_jsonl(directory / TRAFFIC_FILE, (e.as_record() for e in data.events)),
        RELEVANCE_FILE: write_jsonl(
            directory / RELEVANCE_FILE, (a.as_record() for a in data.annotations)
        ),
    }
    truth_rows = [
        {"item_id": it.item_id, "latent": it.latent_style.tolist()} for it in data.items
    ] + [{"query_id": q.query_id, "latent": q.latent_style.tolist()} for q in data.queries]
    counts[TRUTH_FILE] = write_jsonl(directory / TRUTH_FILE, truth_rows)
    write_json(
        directory / SUMMARY_FILE,
        {
            "counts": counts,
            "dropped_queries": data.dropped_queries,
            "clicks": int(sum(e.clicked for e in data.events)),
        },
    )
    logger.info("Wrote dataset to %s (%s)", directory, counts)
    return counts


def _image(row: dict, where: str) -> np.ndarray:
    try:
        return np.asarray(row["image"], dtype=np.float32).astype(np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{where}: malformed image field") from exc


def read_items(directory: Path) -> list[Item]:
    path = require_file(Path(directory) / CATALOG_FILE, "catalog")
    items = []
    for n, row in enumerate(read_jsonl(path)):
        try:
            item = Item(
                item_id=int(row["item_id"]),
                category_id=int(row["category_id"]),
                latent_style=np.zeros(0),
                popularity=float(row["popularity"]),
                image=_image(row, f"{path}:{n + 1}"),
                impressions=int(row["impressions"]),
                clicks=int(row["clicks"]),
            )
        except KeyError as exc:
            raise DataError(f"{path}:{n + 1}: missing field {exc.args[0]}") from exc
        if item.clicks > item.impressions:
            raise DataError(f"{path}:{n + 1}: item {item.item_id} has more clicks than impressions")
        items.append(item)
    return items


def read_queries(directory: Path) -> list[Query]:
    path = require_file(Path(directory) / QUERIES_FILE, "queries")
    return [
        Query(
            query_id=int(row["query_id"]),
            image=_image(row, str(path)),
            latent_style=np.zeros(0),
            category_id=int(row["category_id"]),
        )
        for row in read_jsonl(path)
    ]


def read_events(directory: Path) -> list[ClickEvent]:
    path = require_file(Path(directory) / TRAFFIC_FILE, "traffic log")
    try:
        return [ClickEvent(**{k: int(v) for k, v in row.items()}) for row in read_jsonl(path)]
    except TypeError as exc:
        raise DataError(f"{path}: malformed click event ({exc})") from exc


def read_annotations(directory: Path) -> list[RelevanceAnnotation]:
    path = require_file(Path(directory) / RELEVANCE_FILE, "relevance annotations")
    return [
        RelevanceAnnotation(int(row["query_id"]), {int(i) for i in row["relevant"]})
        for row in read_jsonl(path)
    ]


class DataDirectory:
    """Lazy, read-only access to a generated data directory.

    The truth sidecar is never loaded here.
    """

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        if not self.directory.is_dir():
            require_file(self.directory / CATALOG_FILE, "data directory")

    @cached_property
    def items(self) -> list[Item]:
        return read_items(self.directory)

    @cached_property
    def queries(self) -> list[Query]:
        return read_queries(self.directory)

    @cached_property
    def events(self) -> list[ClickEvent]:
        return read_events(self.directory)

    @cached_property
    def annotations(self) -> list[RelevanceAnnotation]:
        return read_annotations(self.directory)

    @cached_property
    def catalog(self) -> CatalogArrays:
        return CatalogArrays(self.items)


__all__ = [
    "CATALOG_FILE",
    "QUERIES_FILE",
    "TRAFFIC_FILE",
    "RELEVANCE_FILE",
    "TRUTH_FILE",
    "DATA_FILES",
    "SyntheticDataset",
    "generate_dataset",
    "write_dataset",
    "read_items",
    "read_queries",
    "read_events",
    "read_annotations",
    "DataDirectory",
]
