"""Stochastic view transformations for contrastive pretraining.

Images are flat vectors whose coordinates interleave ``channels`` colour
channels. Transformations run in the order jitter, grey, flip, mask.
"""

from __future__ import annotations

import numpy as np

from config.config import AugmentationConfig
from Src.common.errors import DegenerateVectorError
from Src.numerics.ops import NORM_FLOOR


def _subset(size: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    count = int(round(fraction * size))
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(size, size=min(count, size), replace=False)


def _greyscale(image: np.ndarray, channels: int) -> np.ndarray:
    usable = (image.shape[0] // channels) * channels
    if channels <= 1 or usable == 0:
        return image
    out = image.copy()
    pixels = out[:usable].reshape(-1, channels)
    out[:usable] = np.repeat(pixels.mean(axis=1), channels)
    return out


def _transform(image: np.ndarray, cfg: AugmentationConfig, rng: np.random.Generator) -> np.ndarray:
    out = np.array(image, dtype=np.float64, copy=True)
    size = out.shape[0]
    if cfg.jitter_sigma > 0:
        out += cfg.jitter_sigma * rng.standard_normal(size)
    if cfg.grey_prob > 0 and rng.random() < cfg.grey_prob:
        out = _greyscale(out, cfg.channels)
    if cfg.flip_prob > 0 and rng.random() < cfg.flip_prob:
        out[_subset(size, cfg.flip_fraction, rng)] *= -1.0
    if cfg.mask_fraction > 0:
        out[_subset(size, cfg.mask_fraction, rng)] = 0.0
    return out


def augment(image: np.ndarray, cfg: AugmentationConfig, rng: np.random.Generator) -> np.ndarray:
    """Return one random view of ``image``.

    A view whose norm collapses below the normalisation floor is drawn
    again once; a second collapse raises :class:`DegenerateVectorError`.
    """
    for _ in range(2):
        view = _transform(image, cfg, rng)
        if np.linalg.norm(view) > NORM_FLOOR:
            return view
    raise DegenerateVectorError(
        "augmentation produced a zero view twice (mask_fraction too high?)"
    )


def augment_batch(
    images: np.ndarray,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    return np.stack([augment(row, cfg, rng) for row in np.asarray(images)])


__all__ = ["augment", "augment_batch"]
