"""Deterministic synthetic cohorts.

Random numbers come from numpy's PCG64 bit generator seeded with
``SynthConfig.seed``; the draw order below is part of the output contract.

1. permutation of slide indices; the first ``floor(n_slides * positive_fraction)``
   are labelled positive
2. per slide, in index order: tile count, grid cells, which tiles are
   high-scoring (positive slides only), label-1 Beta draws, label-0 Beta
   draws, attention noise
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import IO

import numpy as np

from weep.tile_store import SlideBag, TileRecord

__all__ = ["SynthConfig", "generate_cohort"]


@dataclass(frozen=True)
class SynthConfig:
    n_slides: int = 200
    tiles_min: int = 40
    tiles_max: int = 160
    positive_fraction: float = 0.5
    pos_alpha: float = 8.0
    pos_beta: float = 2.0
    neg_alpha: float = 2.0
    neg_beta: float = 8.0
    positive_tile_fraction: float = 0.5
    gamma: float = 1.0
    sigma: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_slides < 1:
            raise ValueError("n_slides must be >= 1")
        if not 1 <= self.tiles_min <= self.tiles_max:
            raise ValueError("need 1 <= tiles_min <= tiles_max")
        if not 0.0 < self.positive_fraction < 1.0:
            raise ValueError("positive_fraction must lie in (0, 1)")
        if not 0.0 < self.positive_tile_fraction <= 1.0:
            raise ValueError("positive_tile_fraction must lie in (0, 1]")
        for name in ("pos_alpha", "pos_beta", "neg_alpha", "neg_beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_json(cls, stream: IO[str]) -> "SynthConfig":
        obj = json.load(stream)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


def generate_cohort(config: SynthConfig) -> tuple[list[SlideBag], dict[str, int]]:
    """Synthetic bags (labels attached) and the matching labels table."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n = config.n_slides
    n_pos = math.floor(n * config.positive_fraction)
    positive = np.zeros(n, dtype=bool)
    positive[rng.permutation(n)[:n_pos]] = True

    width = len(str(n - 1))
    bags, labels = [], {}
    for i in range(n):
        slide_id = f"S{i:0{width}d}"
        n_tiles = int(rng.integers(config.tiles_min, config.tiles_max + 1))
        side = math.ceil(math.sqrt(1.5 * n_tiles))
        cells = np.sort(rng.choice(side * side, size=n_tiles, replace=False))

        high = np.zeros(n_tiles, dtype=bool)
        if positive[i]:
            n_high = max(1, round(config.positive_tile_fraction * n_tiles))
            high[rng.permutation(n_tiles)[:n_high]] = True
        scores = np.empty(n_tiles)
        scores[high] = rng.beta(config.pos_alpha, config.pos_beta, size=int(high.sum()))
        scores[~high] = rng.beta(config.neg_alpha, config.neg_beta, size=int((~high).sum()))
        scores = np.clip(scores, 0.0, 1.0)
        noise = rng.normal(0.0, config.sigma, size=n_tiles)
        attention = np.maximum(scores**config.gamma * np.exp(noise), np.finfo(float).tiny)

        tiles = []
        for cell, s, a in zip(cells.tolist(), scores.tolist(), attention.tolist()):
            gy, gx = divmod(cell, side)
            tiles.append(TileRecord(f"{gx}:{gy}", gx, gy, s, a))
        label = int(positive[i])
        bags.append(SlideBag(slide_id, tuple(tiles), label))
        labels[slide_id] = label
    return bags, labels
