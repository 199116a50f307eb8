"""Metric reports: ``report.json`` per run and the flat CSV table."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from Src.common.errors import MissingArtifactError

REPORT_FILE = "report.json"
UNDEFINED = "undefined"


class MetricReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: str | None = None
    hr: float | None = None
    lr_at: dict[int, float] = Field(default_factory=dict)
    cr_at: dict[int, float] = Field(default_factory=dict)
    auc_overall: float | None = None
    auc_bottom_decile: float | None = None
    auc_top_decile: float | None = None
    auc_train: list[float | None] = Field(default_factory=list)
    auc_validation: list[float | None] = Field(default_factory=list)
    geometry: dict[str, Any] | None = None
    config: dict[str, Any] = Field(default_factory=dict)

    @field_validator("hr", "auc_overall", "auc_bottom_decile", "auc_top_decile")
    @classmethod
    def _unit_interval(cls, value: float | None) -> float | None:
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError(f"metric {value} outside [0, 1]")
        return value

    @field_validator("lr_at", "cr_at")
    @classmethod
    def _unit_interval_map(cls, value: dict[int, float]) -> dict[int, float]:
        for k, v in value.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"metric @{k} = {v} outside [0, 1]")
        return value

    def merged(self, other: "MetricReport") -> "MetricReport":
        """Fields set on ``other`` win; everything else is kept."""
        update = other.model_dump(exclude_unset=True)
        config = {**self.config, **update.pop("config", {})}
        return self.model_copy(update={**update, "config": config})

    def save(self, directory: Path) -> Path:
        path = Path(directory) / REPORT_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            self.model_dump_json(indent=2, round_trip=True) + "\n", encoding="utf-8"
        )
        return path

    @classmethod
    def load(cls, directory: Path) -> "MetricReport":
        path = Path(directory) / REPORT_FILE
        if not path.is_file():
            raise MissingArtifactError(f"missing report: {path}")
        return cls.model_validate_json(path.read_text(encoding="utf-8"))


def table_header(k_values: Sequence[int]) -> list[str]:
    return (
        ["mode", "HR"]
        + [f"LR@{k}" for k in k_values]
        + [f"CR@{k}" for k in k_values]
        + ["AUC_overall", "AUC_bottom10", "AUC_top10"]
    )


def _cell(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.6f}"


def table_row(report: MetricReport, k_values: Sequence[int]) -> list[str]:
    """One CSV row; metrics not yet evaluated read as undefined."""
    return (
        [report.mode or "", _cell(report.hr)]
        + [_cell(report.lr_at.get(k)) for k in k_values]
        + [_cell(report.cr_at.get(k)) for k in k_values]
        + [
            _cell(report.auc_overall),
            _cell(report.auc_bottom_decile),
            _cell(report.auc_top_decile),
        ]
    )


def render_table(reports: Iterable[MetricReport], k_values: Sequence[int]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table_header(k_values))
    for report in reports:
        writer.writerow(table_row(report, k_values))
    return buffer.getvalue()


def write_table(path: Path, reports: Iterable[MetricReport], k_values: Sequence[int]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_table(reports, k_values), encoding="utf-8")
    return path


__all__ = [
    "REPORT_FILE",
    "UNDEFINED",
    "MetricReport",
    "table_header",
    "table_row",
    "render_table",
    "write_table",
]
