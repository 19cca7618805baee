"""Cohort statistics over per-slide selection results."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence

from weep.selection import WeepResult

__all__ = [
    "FILTER_MODES",
    "CohortSummary",
    "histogram",
    "summarize",
    "filter_cohort",
    "pick_highlights",
]

FILTER_MODES = (
    "all",
    "predicted-positive",
    "label-positive",
    "label-positive-and-predicted-positive",
)

Z_95 = 1.96


@dataclass(frozen=True)
class CohortSummary:
    n_slides: int
    mean_percent: float
    ci_low: float
    ci_high: float
    histogram: tuple[tuple[float, float, int], ...]


def histogram(percents: Sequence[float], bin_width: float = 5.0) -> list[tuple[float, float, int]]:
    """Fixed-width bins over [0, 100]; the last bin is closed at 100."""
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    n_bins = max(1, math.ceil(100.0 / bin_width - 1e-9))
    edges = [min(100.0, i * bin_width) for i in range(n_bins)] + [100.0]
    counts = [0] * n_bins
    for x in percents:
        if not 0.0 <= x <= 100.0:
            raise ValueError(f"percentage {x!r} outside [0, 100]")
        counts[min(int(x // bin_width), n_bins - 1)] += 1
    return [(edges[i], edges[i + 1], counts[i]) for i in range(n_bins)]


def summarize(results: Sequence[WeepResult], bin_width: float = 5.0) -> CohortSummary:
    """Mean percent selected with a normal-approximation 95% CI.

    The interval is ``mean +/- 1.96 * s / sqrt(m)`` with ``s`` the sample
    standard deviation over ``m`` slides.
    """
    percents = [r.percent_selected for r in results]
    return summarize_percents(percents, bin_width)


def summarize_percents(percents: Sequence[float], bin_width: float = 5.0) -> CohortSummary:
    m = len(percents)
    if m == 0:
        raise ValueError("empty cohort")
    if m == 1:
        raise ValueError("confidence interval needs at least two slides")
    mean = statistics.fmean(percents)
    half = Z_95 * statistics.stdev(percents) / math.sqrt(m)
    return CohortSummary(
        n_slides=m,
        mean_percent=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        histogram=tuple(histogram(percents, bin_width)),
    )


def filter_cohort(
    results: Sequence[WeepResult],
    labels: Mapping[str, int] | None,
    mode: str = "label-positive-and-predicted-positive",
) -> list[WeepResult]:
    if mode not in FILTER_MODES:
        raise ValueError(f"unknown cohort filter {mode!r}; expected one of {', '.join(FILTER_MODES)}")
    if mode.startswith("label") and labels is None:
        raise ValueError(f"filter {mode!r} needs a labels table")
    out = []
    for r in results:
        if "predicted-positive" in mode and not r.predicted_positive:
            continue
        if mode.startswith("label"):
            if r.slide_id not in labels:
                raise ValueError(f"no label for slide {r.slide_id!r}")
            if labels[r.slide_id] != 1:
                continue
        out.append(r)
    return out


def pick_highlights(results: Sequence[WeepResult]) -> list[str]:
    """One slide from each of the <20%, 20-80% and >80% selected bands.

    Picks the first slide by ``slide_id`` in each band; empty bands are skipped.
    """
    bands = [
        lambda x: x < 20.0,
        lambda x: 20.0 < x < 80.0,
        lambda x: x > 80.0,
    ]
    ordered = sorted(results, key=lambda r: r.slide_id)
    picks = []
    for in_band in bands:
        for r in ordered:
            if in_band(r.percent_selected):
                picks.append(r.slide_id)
                break
    return picks
