"""Adagrad.

Accumulator ``G += g²``; update ``θ ← θ − lr·g / (√G + ε)`` elementwise.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from Src.common.errors import FrozenParameterError, ShapeError
from Src.numerics.tensor import DTYPE, GradientMap, Parameter

DEFAULT_LEARNING_RATE = 0.05
DEFAULT_EPSILON = 1e-10


@dataclass(slots=True)
class AdagradState:
    learning_rate: float = DEFAULT_LEARNING_RATE
    epsilon: float = DEFAULT_EPSILON
    accumulators: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive")


def adagrad_step(
    params: Iterable[Parameter],
    grads: GradientMap | Mapping[Parameter, np.ndarray],
    state: AdagradState,
) -> tuple[list[Parameter], AdagradState]:
    """Apply one in-place Adagrad update; parameters without a gradient are untouched."""
    updated: list[Parameter] = []
    for param in params:
        grad = grads.get(param)
        updated.append(param)
        if grad is None:
            continue
        if param.frozen:
            raise FrozenParameterError(f"refusing to update frozen parameter '{param.name}'")
        grad = np.asarray(grad, dtype=DTYPE)
        if grad.shape != param.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} != parameter '{param.name}' shape {param.shape}"
            )
        acc = state.accumulators.get(param.name)
        if acc is None:
            acc = np.zeros(param.shape, dtype=DTYPE)
            state.accumulators[param.name] = acc
        elif acc.shape != param.shape:
            raise ShapeError(f"accumulator for '{param.name}' has shape {acc.shape}")
        acc += grad * grad
        param.data -= state.learning_rate * grad / (np.sqrt(acc) + state.epsilon)
    return updated, state


class Adagrad:
    """Stateful wrapper bound to a fixed set of parameters."""

    def __init__(
        self,
        params: Iterable[Parameter],
        learning_rate: float = DEFAULT_LEARNING_RATE,
        epsilon: float = DEFAULT_EPSILON,
    ) -> None:
        self.params = [p for p in params if not p.frozen]
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError("parameter names must be unique")
        self.state = AdagradState(learning_rate=learning_rate, epsilon=epsilon)

    def step(self, grads: GradientMap) -> None:
        adagrad_step(self.params, grads, self.state)


__all__ = [
    "DEFAULT_LEARNING_RATE",
    "DEFAULT_EPSILON",
    "AdagradState",
    "adagrad_step",
    "Adagrad",
]
