"""Detect partial reachability (peninsulas) and partitions (islands) in the Internet."""

__version__ = "0.1.0"

from .core import BlockId, Observation, ObservationState, ObservationTable, Prefix, TimeBinning, VantagePoint
from .detectors import IslandEvent, PeninsulaEvent, chiloe, classify_rounds, detect, peninsula_events
from .oracle import ReachabilityGraph, TruthLabel, internet_core, majority_control, truth_labels

__all__ = [
    "BlockId",
    "IslandEvent",
    "Observation",
    "ObservationState",
    "ObservationTable",
    "PeninsulaEvent",
    "Prefix",
    "ReachabilityGraph",
    "TimeBinning",
    "TruthLabel",
    "VantagePoint",
    "__version__",
    "chiloe",
    "classify_rounds",
    "detect",
    "internet_core",
    "majority_control",
    "peninsula_events",
    "truth_labels",
]
