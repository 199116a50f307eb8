"""Debiasing network: low-impression positive mining, L_D and the gated fusion."""

from __future__ import annotations

from Src.debias.geometry import GeometryReport, cosine_gap, geometry_report, matched_pairs
from Src.debias.index import SimilarityIndex, build_index
from Src.debias.loss import DebiasLoss, l_d
from Src.debias.mining import MinedPair, PositiveMiner, mine_positive
from Src.debias.network import DebiasModel, debias_forward, fuse, fused_features

__all__ = [
    "GeometryReport",
    "cosine_gap",
    "geometry_report",
    "matched_pairs",
    "SimilarityIndex",
    "build_index",
    "DebiasLoss",
    "l_d",
    "MinedPair",
    "PositiveMiner",
    "mine_positive",
    "DebiasModel",
    "debias_forward",
    "fuse",
    "fused_features",
]
