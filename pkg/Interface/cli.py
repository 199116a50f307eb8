from __future__ import annotations

import json
import logging
from collections.abc import Callable
from enum import Enum
from pathlib import Path
from typing import TypeVar

import typer

from App.ablation import assemble_table, run_ablation
from App.manifest import verify_manifest
from App.pipeline import (
    DEFAULT_MODE,
    MODES,
    encode,
    evaluate_ctr,
    evaluate_search,
    generate_data,
    predict,
    train_ctr_stage,
    train_encoder,
)
from config.config import PipelineConfig, load_config
from config.logger_config import logger, set_console_level
from Src.common.errors import PipelineError

app = typer.Typer(
    name="visual_ctr",
    help="Contrastive visual encoders, debiasing and CTR prediction on synthetic click logs.",
    no_args_is_help=True,
)

T = TypeVar("T")


class Stage(str, Enum):
    classifier = "classifier"
    s1 = "s1"
    s2 = "s2"
    ctr = "ctr"


class EvalKind(str, Enum):
    search = "search"
    ctr = "ctr"


CONFIG_OPTION = typer.Option(None, "--config", "-c", help="TOML configuration file.")
SEED_OPTION = typer.Option(None, "--seed", "-s", help="Root seed; overrides the config.")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory; overrides the config.")
MODE_OPTION = typer.Option(
    DEFAULT_MODE,
    "--mode",
    "-m",
    help=f"Ablation mode, one of: {', '.join(MODES)}.",
)


@app.callback()
def _verbosity(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show per-step DEBUG logs on the console."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only show warnings and errors."),
) -> None:
    if verbose and quiet:
        raise typer.BadParameter("--verbose and --quiet are mutually exclusive")
    if verbose:
        set_console_level(logging.DEBUG)
    elif quiet:
        set_console_level(logging.WARNING)


def _config(config: Path | None, seed: int | None, out: Path | None) -> PipelineConfig:
    return load_config(config, seed=seed, output_dir=out)


def _run(action: Callable[[], T]) -> T:
    """Run a pipeline call, turning its errors into exit codes."""
    try:
        return action()
    except PipelineError as exc:
        logger.debug("Command failed", exc_info=True)
        typer.echo(f"{type(exc).__name__}: {exc}", err=True)
        raise typer.Exit(code=exc.exit_code)


@app.command("gen-data")
def gen_data(
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Generate the synthetic catalog, queries, click log and relevance labels."""
    target = _run(lambda: generate_data(_config(config, seed, out)))
    typer.echo(str(target))


@app.command()
def train(
    stage: Stage = typer.Argument(..., help="Stage to train."),
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
    mode: str = MODE_OPTION,
) -> None:
    """Train one encoder stage, or the CTR model over the frozen encoder."""

    def action() -> str:
        cfg = _config(config, seed, out)
        if stage is Stage.ctr:
            result = train_ctr_stage(cfg, mode)
            return json.dumps([m.as_dict() for m in result.epochs], indent=2)
        result = train_encoder(cfg, mode, stage.value)
        return json.dumps({"steps": result.steps, "checkpoint": str(result.checkpoint_path)})

    typer.echo(_run(action))


@app.command("encode")
def encode_command(
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
    mode: str = MODE_OPTION,
) -> None:
    """Write query and item embeddings for every encoder stage of a mode."""
    written = _run(lambda: encode(_config(config, seed, out), mode))
    typer.echo(json.dumps({name: str(path) for name, path in written.items()}, indent=2))


@app.command("predict")
def predict_command(
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
    mode: str = MODE_OPTION,
) -> None:
    """Score the held-out days with the trained CTR model."""
    typer.echo(str(_run(lambda: predict(_config(config, seed, out), mode))))


@app.command("eval")
def eval_command(
    kind: EvalKind = typer.Argument(..., help="Which protocol to evaluate."),
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
    mode: str = MODE_OPTION,
) -> None:
    """Evaluate search metrics or CTR AUCs and update the mode's report."""

    def action():
        cfg = _config(config, seed, out)
        return evaluate_search(cfg, mode) if kind is EvalKind.search else evaluate_ctr(cfg, mode)

    report = _run(action)
    typer.echo(report.model_dump_json(indent=2))


@app.command()
def ablation(
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Run all five modes from fresh data and assemble table.csv."""
    path = _run(lambda: run_ablation(_config(config, seed, out)))
    typer.echo(path.read_text(encoding="utf-8"), nl=False)


@app.command()
def report(
    config: Path | None = CONFIG_OPTION,
    seed: int | None = SEED_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Assemble table.csv from the reports already on disk."""
    path = _run(lambda: assemble_table(_config(config, seed, out)))
    typer.echo(path.read_text(encoding="utf-8"), nl=False)


@app.command()
def verify(directory: Path = typer.Argument(..., help="Directory holding a manifest.json.")) -> None:
    """Check a manifest against the files on disk."""
    check = _run(lambda: verify_manifest(directory))
    typer.echo(check.model_dump_json(indent=2))
    if not check.ok:
        raise typer.Exit(code=1)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
