"""MCAV aggregation: histogram, confusion counts and accuracy metrics.

This is the statistical-analyser half of the protocol: it never touches
agents, only the per-antigen classification results. Anomalous is the
positive class throughout. Rates with a zero denominator are reported as
None, never silently coerced to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .agents import Category


class EmptyResultsError(ValueError):
    """Metrics requested for an empty result list."""


class ValueOutOfRangeError(ValueError):
    """A histogram value lies outside [0, 1]."""


@dataclass(frozen=True)
class ClassificationResult:
    antigen_id: int
    mcav: float
    predicted: Category
    actual: Category


@dataclass(frozen=True)
class MCAVHistogram:
    """Equal-width histogram over [0, 1]; the top bin is right-closed."""

    bin_count: int
    edges: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    true_positive_rate: float | None
    false_positive_rate: float | None
    mean_mcav_normal: float | None
    mean_mcav_anomalous: float | None


def build_histogram(mcavs, bins: int = 10) -> MCAVHistogram:
    """Bin MCAVs into ``bins`` equal-width bins over [0, 1].

    A value v falls in bin floor(v * bins), except v = 1.0 which falls in
    the last bin.
    """
    if bins < 1:
        raise ValueError(f"bin count must be >= 1, got {bins}")
    counts = [0] * bins
    for v in mcavs:
        if not 0.0 <= v <= 1.0:
            raise ValueOutOfRangeError(f"MCAV {v} outside [0, 1]")
        counts[min(int(v * bins), bins - 1)] += 1
    edges = tuple(i / bins for i in range(bins + 1))
    return MCAVHistogram(bin_count=bins, edges=edges, counts=tuple(counts))


def compute_metrics(results) -> tuple[ConfusionCounts, Metrics]:
    """Confusion counts, accuracy, guarded rates, and per-class mean MCAVs."""
    if not results:
        raise EmptyResultsError("no classification results to score")

    tp = tn = fp = fn = 0
    normal_mcavs: list[float] = []
    anomalous_mcavs: list[float] = []
    for r in results:
        if r.actual is Category.ANOMALOUS:
            anomalous_mcavs.append(r.mcav)
            if r.predicted is Category.ANOMALOUS:
                tp += 1
            else:
                fn += 1
        else:
            normal_mcavs.append(r.mcav)
            if r.predicted is Category.ANOMALOUS:
                fp += 1
            else:
                tn += 1

    confusion = ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)
    # fsum keeps the means exactly permutation-invariant.
    metrics = Metrics(
        accuracy=(tp + tn) / confusion.total,
        true_positive_rate=tp / (tp + fn) if tp + fn else None,
        false_positive_rate=fp / (fp + tn) if fp + tn else None,
        mean_mcav_normal=(
            math.fsum(normal_mcavs) / len(normal_mcavs) if normal_mcavs else None
        ),
        mean_mcav_anomalous=(
            math.fsum(anomalous_mcavs) / len(anomalous_mcavs) if anomalous_mcavs else None
        ),
    )
    return confusion, metrics
