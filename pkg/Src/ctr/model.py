"""CTR tower over visual features and ID embeddings."""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from Src.common.errors import ShapeError
from Src.ctr.features import ID_FIELDS, FeatureVocab, SampleBatch
from Src.debias.network import DebiasModel, fused_features
from Src.model.checkpoint import Checkpoint, Provenance, load_checkpoint, save_checkpoint
from Src.model.embeddings import EmbeddingTable
from Src.numerics import ops
from Src.numerics.layers import Dense, Mlp, Module
from Src.numerics.tensor import Parameter, Tensor, no_grad

TABLE_SCALE = 0.05

Layout = list[tuple[str, int]]


class CtrModel(Module):
    """Input layout: ``v_q | v_p | user | item | category | context``."""

    def __init__(
        self,
        vocab: FeatureVocab,
        visual_dim: int,
        tower_sizes: Sequence[int],
        rng: np.random.Generator,
        *,
        embedding_width: int = 8,
    ) -> None:
        if not tower_sizes:
            raise ShapeError("the CTR tower needs at least one hidden layer")
        self.vocab = vocab
        self.visual_dim = visual_dim
        self.embedding_width = embedding_width
        self.tables = {
            name: Parameter(
                rng.normal(0.0, TABLE_SCALE, size=(vocab.size(name), embedding_width)),
                f"ctr.table.{name}",
            )
            for name in ID_FIELDS
        }
        self.tower = Mlp(
            "ctr.tower",
            [self.input_dim, *tower_sizes],
            ["relu"] * len(tower_sizes),
            rng,
        )
        self.output = Dense("ctr.output", tower_sizes[-1], 1, rng)

    @property
    def layout(self) -> Layout:
        return [("v_q", self.visual_dim), ("v_p", self.visual_dim)] + [
            (name, self.embedding_width) for name in ID_FIELDS
        ]

    @property
    def input_dim(self) -> int:
        return sum(width for _, width in self.layout)

    @property
    def tower_sizes(self) -> list[int]:
        return self.tower.sizes[1:]

    def logits(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"CTR input must be (B, {self.input_dim}), got {x.shape}")
        out = self.output(self.tower(x))
        return ops.reshape(out, (x.shape[0],))

    def named_parameters(self) -> dict[str, Parameter]:
        params = {p.name: p for p in self.tables.values()}
        params.update(self.tower.named_parameters())
        params.update(self.output.named_parameters())
        return params


def assemble_input(
    model: CtrModel,
    v_q: Tensor | np.ndarray,
    v_p: Tensor | np.ndarray,
    batch: SampleBatch,
) -> Tensor:
    v_q, v_p = ops.as_tensor(v_q), ops.as_tensor(v_p)
    for name, value in (("v_q", v_q), ("v_p", v_p)):
        if value.ndim != 2 or value.shape != (len(batch), model.visual_dim):
            raise ShapeError(
                f"{name} must be ({len(batch)}, {model.visual_dim}) per the layout, got {value.shape}"
            )
    ids = {
        "user": batch.user_ids,
        "item": batch.item_ids,
        "category": batch.category_ids,
        "context": batch.context_ids,
    }
    lookups = [
        ops.take_rows(model.tables[name], model.vocab.encode(name, ids[name]))
        for name in ID_FIELDS
    ]
    return ops.concat([v_q, v_p, *lookups], axis=1)


def predict(model: CtrModel, x: Tensor) -> Tensor:
    """Click probability; strictly inside (0, 1)."""
    return ops.sigmoid(model.logits(x))


class CtrPredictor:
    """CTR model bound to frozen visual features and an optional debias network.

    Query features are always v^S2. Item features are the gated fusion of
    v^S2 and v^D when a debias network is attached, v^S2 otherwise.
    """

    def __init__(
        self,
        model: CtrModel,
        query_features: EmbeddingTable,
        item_features: EmbeddingTable,
        debias: DebiasModel | None = None,
    ) -> None:
        for name, table in (("query", query_features), ("item", item_features)):
            if table.dim != model.visual_dim:
                raise ShapeError(
                    f"{name} features have dimension {table.dim}, layout expects {model.visual_dim}"
                )
        self.model = model
        self.query_features = query_features
        self.item_features = item_features
        self.debias = debias

    def parameters(self) -> list[Parameter]:
        params = self.model.parameters()
        if self.debias is not None:
            params.extend(self.debias.parameters())
        return params

    def state_dict(self) -> dict[str, np.ndarray]:
        state = self.model.state_dict()
        if self.debias is not None:
            state.update(self.debias.state_dict())
        return state

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, value in sorted(self.state_dict().items()):
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(value, dtype="<f8").tobytes())
        return h.hexdigest()

    def item_vectors(self, item_ids: np.ndarray) -> Tensor:
        v_s2 = self.item_features.lookup(item_ids)
        if self.debias is None:
            return Tensor(v_s2)
        return fused_features(self.debias, v_s2)

    def inputs(self, batch: SampleBatch) -> Tensor:
        v_q = self.query_features.lookup(batch.query_ids)
        return assemble_input(self.model, v_q, self.item_vectors(batch.item_ids), batch)

    def logits(self, batch: SampleBatch) -> Tensor:
        return self.model.logits(self.inputs(batch))

    def predict(self, batch: SampleBatch, *, chunk_size: int = 4096) -> np.ndarray:
        """Click probabilities in ``chunk_size`` slices.

        Each row depends only on its own sample. Scores computed alone or in
        any batch agree to 1e-12; bit equality is not promised because BLAS
        may order the tower's reductions differently per matrix shape.
        """
        if len(batch) == 0:
            return np.zeros(0)
        parts = []
        with no_grad():
            for start in range(0, len(batch), chunk_size):
                rows = np.arange(start, min(start + chunk_size, len(batch)))
                parts.append(predict(self.model, self.inputs(batch.take(rows))).data)
        return np.concatenate(parts)

    def fused_table(self) -> EmbeddingTable:
        """Item features as the tower sees them, for every catalog item."""
        with no_grad():
            vectors = self.item_vectors(self.item_features.ids).data
        return EmbeddingTable(self.item_features.ids.copy(), vectors)

    def header(self) -> dict[str, Any]:
        return {
            "layout": [[name, width] for name, width in self.model.layout],
            "vocab": self.model.vocab.as_dict(),
            "tower_sizes": self.model.tower_sizes,
            "embedding_width": self.model.embedding_width,
            "debias": None if self.debias is None else self.debias.architecture(),
        }

    def save(self, path: Path, provenance: Provenance, **extra: Any) -> str:
        return save_checkpoint(
            path, self.state_dict(), {"provenance": provenance.as_dict(), **self.header(), **extra}
        )

    @classmethod
    def from_checkpoint(
        cls,
        checkpoint: Checkpoint,
        query_features: EmbeddingTable,
        item_features: EmbeddingTable,
    ) -> "CtrPredictor":
        meta = checkpoint.metadata
        try:
            layout = [(str(name), int(width)) for name, width in meta["layout"]]
            vocab = FeatureVocab.from_dict(meta["vocab"])
            tower_sizes = [int(s) for s in meta["tower_sizes"]]
            width = int(meta["embedding_width"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeError(f"CTR checkpoint header is incomplete: {exc}") from exc
        rng = np.random.default_rng(0)
        model = CtrModel(vocab, layout[0][1], tower_sizes, rng, embedding_width=width)
        if model.layout != layout:
            raise ShapeError(f"checkpoint layout {layout} does not match model layout {model.layout}")
        model.load_state_dict(
            {k: v for k, v in checkpoint.tensors.items() if k.startswith("ctr.")}
        )
        debias = None
        arch = meta.get("debias")
        if arch:
            debias = DebiasModel(
                int(arch["dim"]),
                [int(h) for h in arch["hidden_sizes"]],
                list(arch["activations"]),
                rng,
                gate_mode=str(arch["gate_mode"]),
                gate_bias=bool(arch["gate_bias"]),
            )
            debias.load_state_dict(
                {k: v for k, v in checkpoint.tensors.items() if k.startswith("debias.")}
            )
        return cls(model, query_features, item_features, debias)

    @classmethod
    def load(
        cls,
        path: Path,
        query_features: EmbeddingTable,
        item_features: EmbeddingTable,
    ) -> "CtrPredictor":
        return cls.from_checkpoint(load_checkpoint(path), query_features, item_features)


__all__ = [
    "Layout",
    "CtrModel",
    "assemble_input",
    "predict",
    "CtrPredictor",
]
