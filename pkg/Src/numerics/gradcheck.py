"""Central finite-difference gradient checks."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from Src.numerics.tensor import Parameter, Tape, Tensor, backward, no_grad

DEFAULT_STEP = 1e-6


@dataclass(slots=True)
class GradCheckResult:
    max_relative_error: float
    per_parameter: dict[str, float]

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute gap scaled by the larger gradient magnitude."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def numeric_gradient(
    loss_fn: Callable[[], Tensor],
    param: Parameter,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    grad = np.zeros(param.shape)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            upper = loss_fn().item()
            flat[i] = original - step
            lower = loss_fn().item()
            flat[i] = original
            out[i] = (upper - lower) / (2.0 * step)
    return grad


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    step: float = DEFAULT_STEP,
) -> GradCheckResult:
    """Compare tape gradients of ``loss_fn()`` against central differences."""
    with Tape() as tape:
        loss = loss_fn()
    analytic = backward(loss, tape)
    per_parameter: dict[str, float] = {}
    for param in params:
        expected = analytic.get(param, np.zeros(param.shape))
        per_parameter[param.name] = relative_error(
            expected, numeric_gradient(loss_fn, param, step)
        )
    worst = max(per_parameter.values()) if per_parameter else 0.0
    return GradCheckResult(max_relative_error=worst, per_parameter=per_parameter)


__all__ = [
    "DEFAULT_STEP",
    "GradCheckResult",
    "relative_error",
    "numeric_gradient",
    "check_gradients",
]
