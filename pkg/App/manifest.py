"""Run manifests: every output file, its hash, and where its weights came from."""

from __future__ import annotations

import platform
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from config.logger_config import logger
from Src.common.errors import DataError, MissingArtifactError
from Src.common.io import sha256_file

MANIFEST_FILE = "manifest.json"
TRACKED_PACKAGES = ("numpy", "scipy", "pydantic", "typer")


class ArtifactRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str
    mode: str | None = None
    seed: int
    inputs: dict[str, str] = Field(default_factory=dict)
    artifacts: list[ArtifactRecord] = Field(default_factory=list)
    provenance: list[dict[str, Any]] = Field(default_factory=list)
    started_at: str
    finished_at: str
    wall_clock_seconds: float
    versions: dict[str, str] = Field(default_factory=dict)


class ManifestCheck(BaseModel):
    missing: list[str] = Field(default_factory=list)
    mismatched: list[str] = Field(default_factory=list)
    orphans: list[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.mismatched or self.orphans)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def package_versions() -> dict[str, str]:
    found = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            found[name] = version(name)
        except PackageNotFoundError:
            found[name] = "unknown"
    return found


def owned_files(directory: Path) -> list[Path]:
    """Files under ``directory`` that its manifest must list.

    Subdirectories holding their own manifest belong to that manifest.
    """
    directory = Path(directory)
    owned: list[Path] = []
    for path in sorted(directory.iterdir()):
        if path.is_dir():
            if not (path / MANIFEST_FILE).exists():
                owned.extend(owned_files(path))
        elif path.name != MANIFEST_FILE:
            owned.append(path)
    return owned


def _relative(directory: Path, path: Path) -> str:
    return path.relative_to(directory).as_posix()


def build_manifest(
    directory: Path,
    *,
    kind: str,
    seed: int,
    started: datetime,
    mode: str | None = None,
    inputs: dict[str, Path] | None = None,
    provenance: list[dict[str, Any]] | None = None,
) -> RunManifest:
    directory = Path(directory)
    finished = utc_now()
    artifacts = [
        ArtifactRecord(
            path=_relative(directory, path),
            sha256=sha256_file(path),
            bytes=path.stat().st_size,
        )
        for path in owned_files(directory)
    ]
    return RunManifest(
        kind=kind,
        mode=mode,
        seed=seed,
        inputs={name: sha256_file(path) for name, path in sorted((inputs or {}).items())},
        artifacts=artifacts,
        provenance=provenance or [],
        started_at=started.isoformat(),
        finished_at=finished.isoformat(),
        wall_clock_seconds=(finished - started).total_seconds(),
        versions=package_versions(),
    )


def write_manifest(directory: Path, manifest: RunManifest) -> Path:
    path = Path(directory) / MANIFEST_FILE
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("Manifest for %s lists %d artifacts", directory, len(manifest.artifacts))
    return path


def read_manifest(directory: Path) -> RunManifest:
    path = Path(directory) / MANIFEST_FILE
    if not path.is_file():
        raise MissingArtifactError(f"missing manifest: {path}")
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))


def verify_manifest(directory: Path) -> ManifestCheck:
    """Compare a manifest with the files actually present."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    check = ManifestCheck()
    listed = set()
    for record in manifest.artifacts:
        listed.add(record.path)
        path = directory / record.path
        if not path.is_file():
            check.missing.append(record.path)
        elif sha256_file(path) != record.sha256:
            check.mismatched.append(record.path)
    check.orphans = [
        rel for rel in (_relative(directory, p) for p in owned_files(directory)) if rel not in listed
    ]
    return check


def require_valid_manifest(directory: Path) -> RunManifest:
    check = verify_manifest(directory)
    if check.missing:
        raise MissingArtifactError(f"{directory}: manifest lists missing files {check.missing}")
    if check.mismatched or check.orphans:
        raise DataError(
            f"{directory}: hash mismatches {check.mismatched}, unlisted files {check.orphans}"
        )
    return read_manifest(directory)


__all__ = [
    "MANIFEST_FILE",
    "ArtifactRecord",
    "RunManifest",
    "ManifestCheck",
    "utc_now",
    "package_versions",
    "owned_files",
    "build_manifest",
    "write_manifest",
    "read_manifest",
    "verify_manifest",
    "require_valid_manifest",
]
