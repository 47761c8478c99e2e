"""Aggregate analyses over detector output."""

from .durations import DurationCDFs, duration_distributions
from .fractions import BlockTimeFractions, blocktime_fractions, convergence_curve, subset_convergence
from .routing import RoutedPrefix, RoutingTable, group_by_prefix, halt_classification, lpm, peninsula_prefix_fraction
from .similarity import SimilarityMatrix, similarity_matrix
from .stats import TTest, complementary_pair_ttests, one_sample_ttest
from .validation import ArkThresholds, ConfusionCounts, ark_comparison, confusion_metrics

__all__ = [
    "ArkThresholds",
    "BlockTimeFractions",
    "ConfusionCounts",
    "DurationCDFs",
    "RoutedPrefix",
    "RoutingTable",
    "SimilarityMatrix",
    "TTest",
    "ark_comparison",
    "blocktime_fractions",
    "complementary_pair_ttests",
    "confusion_metrics",
    "convergence_curve",
    "duration_distributions",
    "group_by_prefix",
    "halt_classification",
    "lpm",
    "one_sample_ttest",
    "peninsula_prefix_fraction",
    "similarity_matrix",
    "subset_convergence",
]
