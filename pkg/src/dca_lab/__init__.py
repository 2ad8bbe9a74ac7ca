"""Deterministic agent-based Dendritic Cell Algorithm simulator.

Classifies labelled numeric records as normal or anomalous: each record
is carried by an antigen agent that presents itself to k randomly picked
DC agents; DCs fuse the record's signals until migration and vote a
context bit back; the fraction of 1-votes (the MCAV) drives the final
classification, aggregated into a histogram, confusion counts and
accuracy.
"""

from .agents import Category
from .analysis import (
    ClassificationResult,
    ConfusionCounts,
    MCAVHistogram,
    Metrics,
    build_histogram,
    compute_metrics,
)
from .data_ingest import (
    AntigenRecord,
    AttributePolicy,
    DatasetSummary,
    MissingValuePolicy,
    load_dataset,
)
from .engine import RunReport, SimConfig, TraceLog, run
from .signal_model import (
    DEFAULT_WEIGHT_MATRIX,
    SignalMapping,
    WeightMatrix,
    default_signal_mapping,
)

__version__ = "0.1.0"

__all__ = [
    "AntigenRecord",
    "AttributePolicy",
    "Category",
    "ClassificationResult",
    "ConfusionCounts",
    "DatasetSummary",
    "DEFAULT_WEIGHT_MATRIX",
    "MCAVHistogram",
    "Metrics",
    "MissingValuePolicy",
    "RunReport",
    "SignalMapping",
    "SimConfig",
    "TraceLog",
    "WeightMatrix",
    "build_histogram",
    "compute_metrics",
    "default_signal_mapping",
    "load_dataset",
    "run",
    "__version__",
]
