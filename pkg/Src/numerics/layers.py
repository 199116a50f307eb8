from __future__ import annotations

import hashlib
from collections.abc import Iterator, Mapping, Sequence

import numpy as np

from Src.common.errors import ShapeError
from Src.numerics import ops
from Src.numerics.tensor import DTYPE, Parameter, Tensor


# initial bias of every layer that feeds a relu
RELU_BIAS_INIT = 0.1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform in ±√(6/(fan_in+fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(DTYPE)


class Module:
    """Anything that owns named parameters."""

    def named_parameters(self) -> dict[str, Parameter]:
        raise NotImplementedError

    def parameters(self) -> list[Parameter]:
        return list(self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(
        self, state: Mapping[str, np.ndarray], *, strict: bool = True
    ) -> None:
        params = self.named_parameters()
        missing = [name for name in params if name not in state]
        if missing:
            raise ShapeError(f"state is missing parameters: {', '.join(missing)}")
        if strict:
            extra = [name for name in state if name not in params]
            if extra:
                raise ShapeError(f"unexpected parameters in state: {', '.join(extra)}")
        for name, param in params.items():
            value = np.asarray(state[name], dtype=DTYPE)
            if value.shape != param.shape:
                raise ShapeError(
                    f"parameter '{name}' expects shape {param.shape}, got {value.shape}"
                )
            param.data = value.copy()

    def freeze(self) -> None:
        for param in self.parameters():
            param.frozen = True

    @property
    def frozen(self) -> bool:
        params = self.parameters()
        return bool(params) and all(p.frozen for p in params)

    def digest(self) -> str:
        """SHA-256 over parameter names and raw bytes, in name order."""
        h = hashlib.sha256()
        for name, param in sorted(self.named_parameters().items()):
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(param.data, dtype="<f8").tobytes())
        return h.hexdigest()


class Dense(Module):
    def __init__(
        self,
        name: str,
        fan_in: int,
        fan_out: int,
        rng: np.random.Generator,
        *,
        bias: bool = True,
        bias_init: float = 0.0,
    ) -> None:
        self.weight = Parameter(glorot_uniform(rng, fan_in, fan_out), f"{name}.weight")
        self.bias = (
            Parameter(np.full(fan_out, bias_init, dtype=DTYPE), f"{name}.bias") if bias else None
        )

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.matmul(x, self.weight)
        return ops.add(out, self.bias) if self.bias is not None else out

    def named_parameters(self) -> dict[str, Parameter]:
        params = {self.weight.name: self.weight}
        if self.bias is not None:
            params[self.bias.name] = self.bias
        return params


class Mlp(Module):
    """Stack of dense layers; ``activations[i]`` follows layer ``i``."""

    def __init__(
        self,
        name: str,
        sizes: Sequence[int],
        activations: Sequence[str],
        rng: np.random.Generator,
    ) -> None:
        if len(sizes) < 2:
            raise ShapeError("an MLP needs at least an input and an output size")
        if len(activations) != len(sizes) - 1:
            raise ShapeError("one activation per layer is required")
        unknown = [a for a in activations if a not in ops.ACTIVATIONS]
        if unknown:
            raise ValueError(f"unknown activations: {unknown}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.layers = [
            Dense(
                f"{name}.{i}",
                fan_in,
                fan_out,
                rng,
                bias_init=RELU_BIAS_INIT if activation == "relu" else 0.0,
            )
            for i, (fan_in, fan_out, activation) in enumerate(zip(sizes[:-1], sizes[1:], activations))
        ]

    @property
    def in_features(self) -> int:
        return self.sizes[0]

    @property
    def out_features(self) -> int:
        return self.sizes[-1]

    def __call__(self, x: Tensor) -> Tensor:
        for layer, activation in zip(self.layers, self.activations):
            x = ops.ACTIVATIONS[activation](layer(x))
        return x

    def __iter__(self) -> Iterator[Dense]:
        return iter(self.layers)

    def named_parameters(self) -> dict[str, Parameter]:
        params: dict[str, Parameter] = {}
        for layer in self.layers:
            params.update(layer.named_parameters())
        return params


__all__ = ["RELU_BIAS_INIT", "glorot_uniform", "Module", "Dense", "Mlp"]
