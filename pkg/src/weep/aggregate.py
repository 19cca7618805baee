"""Tile-to-slide aggregation functions.

Every aggregator maps the tiles of a bag to one slide score ``P``. Sums over
tiles use :func:`math.fsum`, which is correctly rounded and therefore
independent of tile order; attention pooling runs on tiles in ascending
``tile_id`` order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from weep.tile_store import AttentionParams, DataError, SlideBag, TileRecord

__all__ = [
    "Percentile",
    "Mean",
    "Median",
    "AttentionWeightedScore",
    "AttentionPooling",
    "AggregatorSpec",
    "percentile",
    "interpolate_sorted",
    "aggregate_slide",
    "aggregate_tiles",
    "attention_pool",
    "sigmoid",
    "parse_aggregator",
    "aggregator_name",
]


@dataclass(frozen=True)
class Percentile:
    p: float = 0.75

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"percentile p={self.p!r} must lie in (0, 1]")


@dataclass(frozen=True)
class Mean:
    pass


def Median() -> Percentile:
    """The median is the 50th percentile."""
    return Percentile(0.5)


@dataclass(frozen=True)
class AttentionWeightedScore:
    """Tile scores averaged with normalized raw attention weights."""


@dataclass(frozen=True)
class AttentionPooling:
    """Attention pooling over tile features followed by a logistic head."""

    params: AttentionParams


AggregatorSpec = Union[Percentile, Mean, AttentionWeightedScore, AttentionPooling]


def interpolate_sorted(v: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile of an ascending sequence."""
    n = len(v)
    if n == 0:
        raise ValueError("percentile of an empty sequence")
    q = p * (n - 1)
    lo = math.floor(q)
    hi = math.ceil(q)
    if lo == hi:
        return v[lo]
    return v[lo] + (q - lo) * (v[hi] - v[lo])


def percentile(values: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile on position ``p * (n - 1)``.

    >>> percentile([0.1, 0.2, 0.3, 0.4], 0.75)
    0.325
    """
    if len(values) == 0:
        raise ValueError("percentile of an empty sequence")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p={p!r} must lie in (0, 1]")
    return interpolate_sorted(sorted(values), p)


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def attention_logits(features: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Per-tile attention logits ``w . tanh(V h_i)``.

    Evaluated once per distinct feature row: blocked matrix products may round
    identical rows differently, and equal features must get equal weights.
    """
    rows, inverse = np.unique(features, axis=0, return_inverse=True)
    return (np.tanh(rows @ params.V.T) @ params.w)[inverse.reshape(-1)]


def pool_from_logits(features: np.ndarray, logits: np.ndarray, params: AttentionParams):
    """Softmax-weighted feature average and slide probability from precomputed logits."""
    e = np.exp(logits - logits.max())
    a = e / e.sum()
    # pool relative to the first row so identical rows reproduce it exactly
    ref = features[0]
    z = ref + a @ (features - ref)
    return a, sigmoid(float(params.c @ z) + params.b)


def attention_pool(features, params: AttentionParams) -> tuple[np.ndarray, float]:
    """Attention weights and slide probability for one bag of feature vectors.

    Parameters
    ----------
    features : array_like, shape (n, d)
    params : AttentionParams

    Returns
    -------
    weights : ndarray, shape (n,)
        Softmax of ``w . tanh(V h_i)``; sums to one.
    p : float
        ``sigmoid(c . z + b)`` with ``z`` the attention-weighted feature mean.
    """
    H = np.asarray(features, dtype=float)
    if H.ndim != 2 or H.shape[0] < 1:
        raise DataError(f"features must be a non-empty n x d matrix, got shape {H.shape}")
    if H.shape[1] != params.d:
        raise DataError(f"feature dimension {H.shape[1]} does not match params d={params.d}")
    return pool_from_logits(H, attention_logits(H, params), params)


def _weighted_score(tiles: Sequence[TileRecord]) -> float:
    total = math.fsum(t.attention_raw for t in tiles)
    if total == 0.0:
        raise DataError("all attention weights are zero; weighted score undefined")
    return math.fsum(t.attention_raw * t.score for t in tiles) / total


def check_requirements(tiles: Sequence[TileRecord], spec: AggregatorSpec) -> None:
    if isinstance(spec, AttentionWeightedScore):
        missing = [t.tile_id for t in tiles if t.attention_raw is None]
        if missing:
            raise DataError(f"attention-weighted score needs attention on every tile; missing for {missing[0]!r}")
    elif isinstance(spec, AttentionPooling):
        missing = [t.tile_id for t in tiles if t.features is None]
        if missing:
            raise DataError(f"attention pooling needs features on every tile; missing for {missing[0]!r}")
        d = len(tiles[0].features)
        if d != spec.params.d:
            raise DataError(f"feature dimension {d} does not match params d={spec.params.d}")


def aggregate_tiles(tiles: Sequence[TileRecord], spec: AggregatorSpec) -> float:
    """Slide score of an arbitrary non-empty collection of tiles."""
    if len(tiles) == 0:
        raise ValueError("cannot aggregate an empty tile set")
    check_requirements(tiles, spec)
    if isinstance(spec, Percentile):
        return interpolate_sorted(sorted(t.score for t in tiles), spec.p)
    if isinstance(spec, Mean):
        return math.fsum(t.score for t in tiles) / len(tiles)
    if isinstance(spec, AttentionWeightedScore):
        return _weighted_score(tiles)
    if isinstance(spec, AttentionPooling):
        ordered = sorted(tiles, key=lambda t: t.tile_id)
        H = np.array([t.features for t in ordered], dtype=float)
        return attention_pool(H, spec.params)[1]
    raise TypeError(f"unknown aggregator {spec!r}")


def aggregate_slide(bag: SlideBag, spec: AggregatorSpec) -> float:
    return aggregate_tiles(bag.tiles, spec)


_PCT = re.compile(r"p(\d+)")


def parse_aggregator(name: str, params: AttentionParams | None = None) -> AggregatorSpec:
    """Map a CLI selector (``p75``, ``p50``, ``mean``, ``median``, ``attn-score``,
    ``attn-pool``) to an aggregator."""
    name = name.strip().lower()
    m = _PCT.fullmatch(name)
    if m:
        k = int(m.group(1))
        if not 1 <= k <= 100:
            raise ValueError(f"percentile aggregator {name!r} must be p1..p100")
        return Percentile(k / 100)
    if name == "mean":
        return Mean()
    if name == "median":
        return Median()
    if name == "attn-score":
        return AttentionWeightedScore()
    if name == "attn-pool":
        if params is None:
            raise ValueError("attn-pool needs attention parameters")
        return AttentionPooling(params)
    raise ValueError(f"unknown aggregator {name!r}")


def aggregator_name(spec: AggregatorSpec) -> str:
    if isinstance(spec, Percentile):
        pct = spec.p * 100
        return f"p{round(pct)}" if abs(pct - round(pct)) < 1e-9 else f"p{pct!r}"
    if isinstance(spec, Mean):
        return "mean"
    if isinstance(spec, AttentionWeightedScore):
        return "attn-score"
    if isinstance(spec, AttentionPooling):
        return "attn-pool"
    raise TypeError(f"unknown aggregator {spec!r}")
