"""Error hierarchy shared by every stage of the pipeline.

Each class carries the process exit code the CLI uses when it surfaces.
"""

from __future__ import annotations


class PipelineError(RuntimeError):
    """Base class for every failure raised by the pipeline."""

    exit_code: int = 1


class ConfigError(PipelineError, ValueError):
    """Raised when a configuration value or CLI option is invalid."""

    exit_code = 2


class DataError(PipelineError, ValueError):
    """Raised when an operation receives unusable input data."""

    exit_code = 2


class UndefinedMetricError(DataError):
    """Raised when a metric is not defined for its input (single-class AUC)."""


class MissingArtifactError(PipelineError, FileNotFoundError):
    """Raised when a prerequisite artifact does not exist."""

    exit_code = 3


class ProvenanceError(MissingArtifactError):
    """Raised when a checkpoint was not produced by the required parent stage."""


class NumericalError(PipelineError, ArithmeticError):
    """Raised on numerical failure."""

    exit_code = 4


class ShapeError(NumericalError):
    """Raised when tensor dimensions disagree."""


class DegenerateVectorError(NumericalError):
    """Raised when a vector norm falls below the normalisation floor."""


class InvalidProbabilityError(NumericalError):
    """Raised when a probability lies outside the open interval (0, 1)."""


class FrozenParameterError(NumericalError):
    """Raised when a gradient reaches a frozen parameter."""


class NonFiniteError(NumericalError):
    """Raised when a loss or gradient is NaN or infinite."""


class DebiasInactiveError(NumericalError):
    """Raised when the debiasing loss has no usable anchors."""


class AblationError(PipelineError):
    """Raised when one mode of the ablation matrix fails."""

    def __init__(self, mode: str, cause: PipelineError) -> None:
        super().__init__(f"ablation mode '{mode}' failed: {cause}")
        self.mode = mode
        self.exit_code = cause.exit_code


__all__ = [
    "PipelineError",
    "ConfigError",
    "DataError",
    "UndefinedMetricError",
    "MissingArtifactError",
    "ProvenanceError",
    "NumericalError",
    "ShapeError",
    "DegenerateVectorError",
    "InvalidProbabilityError",
    "FrozenParameterError",
    "NonFiniteError",
    "DebiasInactiveError",
    "AblationError",
]
