"""Backward tile selection for tile-based whole-slide image classifiers."""

from weep.aggregate import (
    AttentionPooling,
    AttentionWeightedScore,
    Mean,
    Median,
    Percentile,
    aggregate_slide,
    attention_pool,
    parse_aggregator,
    percentile,
)
from weep.cohort import CohortSummary, filter_cohort, summarize
from weep.render import render_histogram, render_mask, render_weep_plot
from weep.selection import RankMetric, WeepResult, brute_force_prefix, rank_tiles, weep_select
from weep.synth import SynthConfig, generate_cohort
from weep.threshold import DecisionThreshold, roc_points, youden_threshold
from weep.tile_store import (
    AttentionParams,
    DataError,
    SlideBag,
    TileRecord,
    parse_attention_params,
    parse_labels,
    parse_tile_table,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionParams",
    "AttentionPooling",
    "AttentionWeightedScore",
    "CohortSummary",
    "DataError",
    "DecisionThreshold",
    "Mean",
    "Median",
    "Percentile",
    "RankMetric",
    "SlideBag",
    "SynthConfig",
    "TileRecord",
    "WeepResult",
    "aggregate_slide",
    "attention_pool",
    "brute_force_prefix",
    "filter_cohort",
    "generate_cohort",
    "parse_aggregator",
    "parse_attention_params",
    "parse_labels",
    "parse_tile_table",
    "percentile",
    "rank_tiles",
    "render_histogram",
    "render_mask",
    "render_weep_plot",
    "roc_points",
    "summarize",
    "weep_select",
    "youden_threshold",
]
