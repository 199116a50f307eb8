import subprocess
import sys
from pathlib import Path
from typing import Annotated, Optional

import typer

REPO_ROOT = Path(__file__).resolve().parent
PASSTHROUGH = {"allow_extra_args": True, "ignore_unknown_options": True}

app = typer.Typer(
    name="visual_ctr",
    help="Visual CTR pipeline entry point",
    no_args_is_help=False,
)

ExtraArgs = Annotated[Optional[list[str]], typer.Argument()]


def run_module(module_name: str, extra_args: list[str]) -> int:
    """Run ``python -m module_name`` from the repo root and return its exit code."""
    cmd = [sys.executable, "-m", module_name, *extra_args]
    return subprocess.run(cmd, cwd=REPO_ROOT).returncode


@app.command(context_settings=PASSTHROUGH)
def cli(extra_args: ExtraArgs = None):
    """Run the pipeline CLI (gen-data, train, encode, predict, eval, ablation, report, verify)."""
    raise typer.Exit(run_module("Interface.cli", extra_args or []))


@app.command(context_settings=PASSTHROUGH)
def test(extra_args: ExtraArgs = None):
    """Run the test suite; pass ``-m slow`` for the full-size ablation checks."""
    raise typer.Exit(run_module("pytest", extra_args or []))


@app.command()
def quickstart(
    seed: Annotated[int, typer.Option("--seed", "-s")] = 0,
    out: Annotated[Path, typer.Option("--out", "-o")] = Path("runs"),
):
    """Run the whole ablation with the default config and print the table."""
    config = REPO_ROOT / "configs" / "default.toml"
    raise typer.Exit(
        run_module("Interface.cli", ["ablation", "--config", str(config), "--seed", str(seed), "--out", str(out)])
    )


CHOICES = {"1": ("Pipeline CLI", cli), "2": ("Test suite", test), "3": ("Quickstart ablation", quickstart)}


@app.callback(invoke_without_command=True)
def main(ctx: typer.Context):
    """Interactive mode when no command is provided."""
    if ctx.invoked_subcommand is not None:
        return
    typer.echo("Select a mode to run:")
    for key, (label, _) in CHOICES.items():
        typer.echo(f"{key}. {label}")
    choice = typer.prompt(f"Enter choice [1-{len(CHOICES)}]").strip()
    if choice not in CHOICES:
        typer.echo("Invalid choice. Exiting.")
        raise typer.Exit(1)
    ctx.invoke(CHOICES[choice][1])


if __name__ == "__main__":
    app()
