"""Search metrics (HR, LR@K, CR@K), AUC and report assembly."""

from __future__ import annotations

from Src.evaluation.auc import auc, auc_bucketed, bucket_items
from Src.evaluation.ranking import Ranking, rank_all
from Src.evaluation.report import MetricReport, render_table, table_header, write_table
from Src.evaluation.search_metrics import cr_at_k, hit_ratio, lr_at_k

__all__ = [
    "auc",
    "auc_bucketed",
    "bucket_items",
    "Ranking",
    "rank_all",
    "MetricReport",
    "render_table",
    "table_header",
    "write_table",
    "cr_at_k",
    "hit_ratio",
    "lr_at_k",
]
