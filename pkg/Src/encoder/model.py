from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from config.config import EncoderConfig
from Src.common.errors import ShapeError
from Src.model.checkpoint import Checkpoint, Provenance, load_checkpoint, save_checkpoint
from Src.numerics import ops
from Src.numerics.layers import Dense, Mlp, Module
from Src.numerics.tensor import Parameter, Tensor

BODY_PREFIX = "encoder."
HEAD_PREFIX = "head."


class EncoderModel(Module):
    """MLP image encoder ``d_obs -> hidden... -> D`` with an optional category head.

    Hidden layers use relu and the projection is linear. The same instance
    is carried from one training stage to the next; ``provenance`` and
    ``source_sha`` record where its weights came from.
    """

    def __init__(
        self,
        d_obs: int,
        embedding_dim: int,
        hidden_sizes: list[int] | tuple[int, ...] = (64,),
        *,
        rng: np.random.Generator,
        n_categories: int | None = None,
    ) -> None:
        sizes = [d_obs, *hidden_sizes, embedding_dim]
        activations = ["relu"] * len(hidden_sizes) + ["linear"]
        self.body = Mlp("encoder", sizes, activations, rng)
        self.head = (
            Dense("head", embedding_dim, n_categories, rng) if n_categories else None
        )
        self.provenance = Provenance("init")
        self.source_sha: str | None = None

    @classmethod
    def from_config(
        cls,
        d_obs: int,
        cfg: EncoderConfig,
        rng: np.random.Generator,
        *,
        n_categories: int | None = None,
    ) -> "EncoderModel":
        return cls(
            d_obs,
            cfg.embedding_dim,
            list(cfg.hidden_sizes),
            rng=rng,
            n_categories=n_categories,
        )

    @property
    def d_obs(self) -> int:
        return self.body.in_features

    @property
    def embedding_dim(self) -> int:
        return self.body.out_features

    @property
    def hidden_sizes(self) -> list[int]:
        return self.body.sizes[1:-1]

    def __call__(self, images: Tensor | np.ndarray) -> Tensor:
        images = ops.as_tensor(images)
        if images.shape[-1] != self.d_obs:
            raise ShapeError(
                f"encoder expects images of dimension {self.d_obs}, got {images.shape[-1]}"
            )
        return self.body(images)

    def embed(self, images: Tensor | np.ndarray) -> Tensor:
        return ops.l2_normalize(self(images))

    def classify(self, images: Tensor | np.ndarray) -> Tensor:
        if self.head is None:
            raise ShapeError("encoder has no category head")
        return self.head(self(images))

    def named_parameters(self) -> dict[str, Parameter]:
        params = self.body.named_parameters()
        if self.head is not None:
            params.update(self.head.named_parameters())
        return params

    def encoder_parameters(self) -> list[Parameter]:
        return self.body.parameters()

    def encoder_digest(self) -> str:
        """Digest of the encoder body alone; the head does not count."""
        return self.body.digest()

    def architecture(self) -> dict[str, Any]:
        return {
            "d_obs": self.d_obs,
            "embedding_dim": self.embedding_dim,
            "hidden_sizes": self.hidden_sizes,
            "n_categories": None if self.head is None else int(self.head.weight.shape[1]),
        }

    def save(self, path: Path, provenance: Provenance) -> str:
        sha = save_checkpoint(
            path,
            self.state_dict(),
            {"provenance": provenance.as_dict(), "architecture": self.architecture()},
        )
        self.provenance = provenance
        self.source_sha = sha
        return sha

    @classmethod
    def from_checkpoint(
        cls,
        checkpoint: Checkpoint,
        *,
        with_head: bool = True,
    ) -> "EncoderModel":
        arch = checkpoint.metadata.get("architecture")
        if not arch:
            raise ShapeError("checkpoint carries no encoder architecture")
        keep_head = with_head and arch.get("n_categories")
        model = cls(
            int(arch["d_obs"]),
            int(arch["embedding_dim"]),
            [int(h) for h in arch["hidden_sizes"]],
            rng=np.random.default_rng(0),
            n_categories=int(arch["n_categories"]) if keep_head else None,
        )
        state = {
            name: value
            for name, value in checkpoint.tensors.items()
            if name.startswith(BODY_PREFIX) or (keep_head and name.startswith(HEAD_PREFIX))
        }
        model.load_state_dict(state)
        model.provenance = checkpoint.provenance
        model.source_sha = checkpoint.sha256
        return model

    @classmethod
    def load(cls, path: Path, *, with_head: bool = True) -> "EncoderModel":
        return cls.from_checkpoint(load_checkpoint(path), with_head=with_head)


__all__ = ["BODY_PREFIX", "HEAD_PREFIX", "EncoderModel"]
