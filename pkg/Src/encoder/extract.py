from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from Src.common.errors import DegenerateVectorError, ShapeError
from Src.encoder.model import EncoderModel
from Src.model.embeddings import EmbeddingTable
from Src.numerics.ops import NORM_FLOOR
from Src.numerics.tensor import no_grad

DEFAULT_CHUNK = 512


def encode_catalog(
    model: EncoderModel,
    images: np.ndarray,
    ids: Sequence[int] | np.ndarray,
    *,
    chunk_size: int = DEFAULT_CHUNK,
) -> EmbeddingTable:
    """Embed every image and return unit-norm rows in input order.

    Chunks are encoded one at a time and concatenated in order. A row whose
    raw norm is at or below the floor raises with the offending id.
    """
    images = np.asarray(images, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    if images.ndim != 2 or images.shape[0] != ids.shape[0]:
        raise ShapeError(f"need one id per image row, got {images.shape} and {ids.shape}")
    if images.shape[0] == 0:
        return EmbeddingTable(ids, np.zeros((0, model.embedding_dim)))
    parts = []
    with no_grad():
        for start in range(0, images.shape[0], chunk_size):
            raw = model(images[start:start + chunk_size]).data
            norms = np.linalg.norm(raw, axis=1, keepdims=True)
            bad = np.flatnonzero(norms[:, 0] <= NORM_FLOOR)
            if bad.size:
                raise DegenerateVectorError(
                    f"item {int(ids[start + bad[0]])} has a degenerate embedding"
                )
            parts.append(raw / norms)
    return EmbeddingTable(ids, np.concatenate(parts, axis=0))


__all__ = ["encode_catalog"]
