"""The five-mode ablation matrix and the assembled table."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

from App.manifest import build_manifest, utc_now, write_manifest
from App.pipeline import MODES, generate_data, run_dir, run_mode
from config.config import PipelineConfig, dump_resolved
from config.logger_config import log_duration, logger
from Src.common.errors import AblationError, MissingArtifactError, PipelineError
from Src.evaluation.report import MetricReport, write_table

TABLE_FILE = "table.csv"


def collect_reports(cfg: PipelineConfig, modes: Sequence[str] | None = None) -> list[MetricReport]:
    """Per-mode reports in table order.

    With ``modes`` unset, modes without a report are left out; a named mode
    without one raises.
    """
    reports = []
    for mode in modes or MODES:
        try:
            reports.append(MetricReport.load(run_dir(cfg, mode)))
        except MissingArtifactError:
            if modes:
                raise
            logger.info("No report for mode %s yet; left out of the table", mode)
    if not reports:
        raise MissingArtifactError(f"no mode under {cfg.output_dir} has a report.json")
    return reports


def assemble_table(cfg: PipelineConfig, modes: Sequence[str] | None = None) -> Path:
    started = utc_now()
    out = Path(cfg.output_dir)
    reports = collect_reports(cfg, modes)
    path = write_table(out / TABLE_FILE, reports, cfg.eval.k_values)
    dump_resolved(cfg, out)
    write_manifest(out, build_manifest(out, kind="table", seed=cfg.seed, started=started))
    logger.info("Wrote %d table rows to %s", len(reports), path)
    return path


def run_ablation(cfg: PipelineConfig, modes: Sequence[str] | None = None) -> Path:
    """Regenerate the data, run every mode in order and assemble the table.

    The first failing mode aborts the matrix with its name attached.
    """
    modes = list(modes or MODES)
    generate_data(cfg)
    for mode in modes:
        try:
            with log_duration(f"mode {mode}"):
                run_mode(cfg, mode)
        except PipelineError as exc:
            raise AblationError(mode, exc) from exc
    return assemble_table(cfg, modes)


__all__ = ["TABLE_FILE", "collect_reports", "assemble_table", "run_ablation"]
