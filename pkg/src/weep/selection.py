"""Backward tile selection.

Tiles are ranked once by score or attention (descending, ties by ascending
``tile_id``). The top-ranked remaining tile is then removed repeatedly while
the slide score of the remaining tiles stays at or above the decision
threshold. The removed tiles are the region that drives the positive call.

:func:`weep_select` updates the remaining-tile state incrementally;
:func:`brute_force_prefix` re-aggregates every prefix from scratch and serves
as its oracle.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from weep.aggregate import (
    AggregatorSpec,
    AttentionPooling,
    AttentionWeightedScore,
    Mean,
    Percentile,
    aggregate_tiles,
    attention_logits,
    check_requirements,
    interpolate_sorted,
    pool_from_logits,
)
from weep.tile_store import DataError, SlideBag, TileRecord

__all__ = ["RankMetric", "WeepResult", "rank_tiles", "weep_select", "brute_force_prefix"]


class RankMetric(enum.Enum):
    SCORE = "score"
    ATTENTION = "attention"

    @classmethod
    def parse(cls, name: str) -> "RankMetric":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown rank metric {name!r} (expected score or attention)") from None


@dataclass(frozen=True)
class WeepResult:
    slide_id: str
    selected: tuple[str, ...]
    metric_values: tuple[float, ...]
    trajectory: tuple[float, ...]
    threshold: float
    exhausted: bool
    n_tiles: int

    @property
    def initial_p(self) -> float:
        return self.trajectory[0]

    @property
    def final_p(self) -> float:
        return self.trajectory[-1]

    @property
    def n_selected(self) -> int:
        return len(self.selected)

    @property
    def percent_selected(self) -> float:
        return 100.0 * len(self.selected) / self.n_tiles

    @property
    def predicted_positive(self) -> bool:
        return self.initial_p >= self.threshold


def _metric_value(tile: TileRecord, metric: RankMetric) -> float:
    if metric is RankMetric.SCORE:
        return tile.score
    if tile.attention_raw is None:
        raise DataError(f"tile {tile.tile_id!r} has no attention value to rank by")
    return tile.attention_raw


def rank_tiles(bag: SlideBag, metric: RankMetric) -> list[TileRecord]:
    """Tiles in descending metric order, ties by ascending ``tile_id``."""
    metric = RankMetric(metric)
    return sorted(bag.tiles, key=lambda t: (-_metric_value(t, metric), t.tile_id))


_FIX = 1074  # 2**-1074 is the smallest subnormal double


def _fixed(x: float) -> int:
    """``x * 2**1074`` as an exact integer."""
    num, den = x.as_integer_ratio()
    return num << (_FIX + 1 - den.bit_length())


def _unfix(total: int) -> float:
    # int true division rounds correctly, matching math.fsum of the same terms
    return total / (1 << _FIX)


class _Remaining:
    """Slide score of a shrinking tile set, updated one removal at a time."""

    def __init__(self, tiles: Sequence[TileRecord], spec: AggregatorSpec):
        check_requirements(tiles, spec)
        self.spec = spec
        self.n = len(tiles)
        if isinstance(spec, Percentile):
            self.sorted_scores = sorted(t.score for t in tiles)
        elif isinstance(spec, Mean):
            self.total = sum(_fixed(t.score) for t in tiles)
        elif isinstance(spec, AttentionWeightedScore):
            self.weight = sum(_fixed(t.attention_raw) for t in tiles)
            self.total = sum(_fixed(t.attention_raw * t.score) for t in tiles)
        elif isinstance(spec, AttentionPooling):
            ordered = sorted(tiles, key=lambda t: t.tile_id)
            self.index = {t.tile_id: i for i, t in enumerate(ordered)}
            self.H = np.array([t.features for t in ordered], dtype=float)
            self.logits = attention_logits(self.H, spec.params)
            self.mask = np.ones(len(ordered), dtype=bool)
        else:
            raise TypeError(f"unknown aggregator {spec!r}")

    def remove(self, tile: TileRecord) -> None:
        self.n -= 1
        spec = self.spec
        if isinstance(spec, Percentile):
            del self.sorted_scores[bisect_left(self.sorted_scores, tile.score)]
        elif isinstance(spec, Mean):
            self.total -= _fixed(tile.score)
        elif isinstance(spec, AttentionWeightedScore):
            self.weight -= _fixed(tile.attention_raw)
            self.total -= _fixed(tile.attention_raw * tile.score)
        else:
            self.mask[self.index[tile.tile_id]] = False

    def value(self) -> float:
        spec = self.spec
        if isinstance(spec, Percentile):
            return interpolate_sorted(self.sorted_scores, spec.p)
        if isinstance(spec, Mean):
            return _unfix(self.total) / self.n
        if isinstance(spec, AttentionWeightedScore):
            if self.weight == 0:
                raise DataError("all attention weights are zero; weighted score undefined")
            return _unfix(self.total) / _unfix(self.weight)
        return pool_from_logits(self.H[self.mask], self.logits[self.mask], spec.params)[1]


def weep_select(bag: SlideBag, spec: AggregatorSpec, metric: RankMetric, o: float) -> WeepResult:
    """Remove top-ranked tiles while the remaining slide score is ``>= o``.

    ``trajectory[i]`` is the slide score after ``i`` removals. If every tile
    gets removed without the score ever dropping below ``o`` the result is
    flagged ``exhausted``; the empty set is never scored, so the trajectory
    then has one entry per removed tile.
    """
    if not math.isfinite(o):
        raise ValueError(f"threshold {o!r} is not finite")
    metric = RankMetric(metric)
    ranked = rank_tiles(bag, metric)
    state = _Remaining(ranked, spec)
    p = state.value()
    trajectory = [p]
    selected: list[TileRecord] = []
    exhausted = False
    while p >= o:
        tile = ranked[len(selected)]
        selected.append(tile)
        state.remove(tile)
        if state.n == 0:
            exhausted = True
            break
        p = state.value()
        trajectory.append(p)
    return WeepResult(
        slide_id=bag.slide_id,
        selected=tuple(t.tile_id for t in selected),
        metric_values=tuple(_metric_value(t, metric) for t in selected),
        trajectory=tuple(trajectory),
        threshold=o,
        exhausted=exhausted,
        n_tiles=bag.n,
    )


def brute_force_prefix(
    bag: SlideBag, spec: AggregatorSpec, metric: RankMetric, o: float
) -> tuple[int, bool]:
    """Smallest ``k`` with ``f(ranked[k:]) < o``, scoring every prefix independently.

    Returns ``(k, exhausted)``; ``(n, True)`` when no non-empty remainder
    falls below ``o``.
    """
    ranked = rank_tiles(bag, RankMetric(metric))
    n = len(ranked)
    below = [aggregate_tiles(ranked[k:], spec) < o for k in range(n)]
    for k, flag in enumerate(below):
        if flag:
            return k, False
    return n, True
