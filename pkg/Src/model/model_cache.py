from __future__ import annotations

from pathlib import Path

from Src.common.errors import MissingArtifactError

_CHECKPOINT_SUFFIX = ".ctrl"
_EMBEDDING_SUFFIX = ".vemb"


def safe_mode_dirname(mode: str) -> str:
    return mode.replace("+", "_").replace("-", "_").replace(" ", "_").lower()


def encoder_checkpoint_name(stage: str) -> str:
    return f"encoder_{stage}{_CHECKPOINT_SUFFIX}"


def ctr_checkpoint_name() -> str:
    return f"ctr{_CHECKPOINT_SUFFIX}"


def embedding_name(stage: str, kind: str) -> str:
    return f"{kind}_{stage}{_EMBEDDING_SUFFIX}"


def _checkpoint_name(stage: str) -> str:
    return ctr_checkpoint_name() if stage == "ctr" else encoder_checkpoint_name(stage)


def find_local_checkpoint(run_dir: Path, stage: str) -> Path | None:
    """Checkpoint for ``stage`` in the run directory, or None."""
    candidate = Path(run_dir) / _checkpoint_name(stage)
    return candidate if candidate.exists() else None


def require_checkpoint(run_dir: Path, stage: str) -> Path:
    path = find_local_checkpoint(run_dir, stage)
    if path is None:
        raise MissingArtifactError(f"missing {stage} checkpoint '{_checkpoint_name(stage)}' under {run_dir}")
    return path


__all__ = [
    "safe_mode_dirname",
    "encoder_checkpoint_name",
    "ctr_checkpoint_name",
    "embedding_name",
    "find_local_checkpoint",
    "require_checkpoint",
]
