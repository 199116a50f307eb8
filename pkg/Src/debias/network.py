from __future__ import annotations

import numpy as np

from config.config import DebiasConfig
from Src.common.errors import ShapeError
from Src.numerics import ops
from Src.numerics.layers import Dense, Mlp, Module
from Src.numerics.tensor import Parameter, Tensor

PREFIX = "debias."


class DebiasModel(Module):
    """Debias MLP ``D -> hidden... -> D`` plus the gate ``sigma(W^T [v_s2, v_d])``.

    The MLP's last layer is linear. In vector mode W is (2D, D) and the
    gate is elementwise; in scalar mode W is (2D, 1).
    """

    def __init__(
        self,
        dim: int,
        hidden_sizes: list[int] | tuple[int, ...],
        activations: list[str] | tuple[str, ...],
        rng: np.random.Generator,
        *,
        gate_mode: str = "vector",
        gate_bias: bool = False,
    ) -> None:
        if gate_mode not in ("vector", "scalar"):
            raise ValueError(f"unknown gate mode '{gate_mode}'")
        self.dim = dim
        self.gate_mode = gate_mode
        self.mlp = Mlp(
            "debias.mlp",
            [dim, *hidden_sizes, dim],
            [*activations, "linear"],
            rng,
        )
        self.gate = Dense(
            "debias.gate",
            2 * dim,
            dim if gate_mode == "vector" else 1,
            rng,
            bias=gate_bias,
        )

    @classmethod
    def from_config(cls, dim: int, cfg: DebiasConfig, rng: np.random.Generator) -> "DebiasModel":
        return cls(
            dim,
            list(cfg.hidden_sizes),
            list(cfg.activations),
            rng,
            gate_mode=cfg.gate_mode,
            gate_bias=cfg.gate_bias,
        )

    def named_parameters(self) -> dict[str, Parameter]:
        params = self.mlp.named_parameters()
        params.update(self.gate.named_parameters())
        return params

    def architecture(self) -> dict[str, object]:
        return {
            "dim": self.dim,
            "hidden_sizes": self.mlp.sizes[1:-1],
            "activations": self.mlp.activations[:-1],
            "gate_mode": self.gate_mode,
            "gate_bias": self.gate.bias is not None,
        }


def _check_dim(model: DebiasModel, v: Tensor, what: str) -> None:
    if v.shape[-1] != model.dim:
        raise ShapeError(f"{what} has dimension {v.shape[-1]}, debias expects {model.dim}")


def debias_forward(model: DebiasModel, v_s2: Tensor | np.ndarray) -> Tensor:
    v_s2 = ops.as_tensor(v_s2)
    _check_dim(model, v_s2, "v_s2")
    return model.mlp(v_s2)


def gate_weights(model: DebiasModel, v_s2: Tensor | np.ndarray, v_d: Tensor | np.ndarray) -> Tensor:
    return ops.sigmoid(model.gate(ops.concat([v_s2, v_d], axis=-1)))


def fuse(model: DebiasModel, v_s2: Tensor | np.ndarray, v_d: Tensor | np.ndarray) -> Tensor:
    """``alpha * v_s2 + (1 - alpha) * v_d`` with alpha from the gate."""
    v_s2, v_d = ops.as_tensor(v_s2), ops.as_tensor(v_d)
    _check_dim(model, v_s2, "v_s2")
    _check_dim(model, v_d, "v_d")
    alpha = gate_weights(model, v_s2, v_d)
    return ops.add(ops.mul(alpha, v_s2), ops.mul(ops.sub(1.0, alpha), v_d))


def fused_features(model: DebiasModel, v_s2: Tensor | np.ndarray) -> Tensor:
    return fuse(model, v_s2, debias_forward(model, v_s2))


__all__ = [
    "PREFIX",
    "DebiasModel",
    "debias_forward",
    "gate_weights",
    "fuse",
    "fused_features",
]
