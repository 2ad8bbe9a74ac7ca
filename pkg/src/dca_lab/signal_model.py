"""Signal derivation and the DC signal-processing step.

Normalized attributes in [0,1] are mapped onto three input signals
(PAMP, danger, safe) on a 0-100 scale, which a 3x3 weight matrix fuses
into the costimulation (csm), semimature (semi) and mature (mat) output
signals that dendritic cells accumulate between picks.

Floating-point note: every reduction here is a plain left-to-right sum,
which is what makes engine runs bit-for-bit reproducible against the
straight-line reference implementation used in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

#: Input signals live on [0, SIGNAL_SCALE]. The scale is arbitrary; it only
#: gives migration thresholds an intuitive magnitude.
SIGNAL_SCALE = 100.0


class EmptySourceListError(ValueError):
    """A signal mapping declares no attribute indices for one of its sources."""


class IndexOutOfBoundsError(IndexError):
    """A signal mapping references an attribute index the record does not have."""


@dataclass(frozen=True)
class InputSignals:
    """One (pamp, danger, safe) triple, each component in [0, 100]."""

    pamp: float
    danger: float
    safe: float


@dataclass(frozen=True)
class OutputSignals:
    """One (csm, semi, mat) triple produced from a single set of inputs."""

    csm: float
    semi: float
    mat: float


@dataclass(frozen=True)
class CumulativeSignals:
    """Running totals of the output signals over a DC's sampled antigens."""

    cum_csm: float = 0.0
    cum_semi: float = 0.0
    cum_mat: float = 0.0


@dataclass(frozen=True)
class SignalMapping:
    """Which attribute indices feed each input signal.

    With ``safe_is_complement`` (the default) the safe signal is
    ``100 * (1 - mean)``, so low attribute values read as evidence of
    normality while high values suppress the safe signal.
    """

    pamp_sources: tuple[int, ...]
    danger_sources: tuple[int, ...]
    safe_sources: tuple[int, ...]
    safe_is_complement: bool = True

    def __post_init__(self):
        for name in ("pamp_sources", "danger_sources", "safe_sources"):
            sources = tuple(getattr(self, name))
            object.__setattr__(self, name, sources)
            if not sources:
                raise EmptySourceListError(f"{name} must list at least one attribute index")
            for idx in sources:
                if idx < 0:
                    raise IndexOutOfBoundsError(f"{name} contains negative index {idx}")


@dataclass(frozen=True)
class WeightMatrix:
    """Per-signal weights onto (csm, semi, mat).

    The csm column (first entry of every row) must be nonnegative so that
    cumulative csm never decreases and migration stays reachable.
    """

    pamp: tuple[float, float, float]
    danger: tuple[float, float, float]
    safe: tuple[float, float, float]

    def __post_init__(self):
        for name in ("pamp", "danger", "safe"):
            row = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, row)
            if len(row) != 3:
                raise ValueError(f"{name} row must have exactly 3 weights, got {len(row)}")
            if any(not math.isfinite(v) for v in row):
                raise ValueError(f"{name} row contains a non-finite weight: {row}")
            if row[0] < 0.0:
                raise ValueError(
                    f"csm weight for {name} must be nonnegative, got {row[0]}"
                )


#: Shipped default weights. These are a documented default, not a fitted
#: value: PAMP and danger push toward maturity, safe drives semimaturity and
#: suppresses maturity, and the csm column stays nonnegative.
DEFAULT_WEIGHT_MATRIX = WeightMatrix(
    pamp=(2.0, 0.0, 2.0),
    danger=(1.0, 0.0, 1.0),
    safe=(2.0, 3.0, -3.0),
)


def default_signal_mapping(attribute_count: int = 9) -> SignalMapping:
    """Neutral mapping: every attribute feeds every signal, safe complemented."""
    everything = tuple(range(attribute_count))
    return SignalMapping(everything, everything, everything, safe_is_complement=True)


def _source_mean(attributes: Sequence[float], sources: tuple[int, ...]) -> float:
    # Left-to-right sum; the reference implementation mirrors this exactly.
    total = 0.0
    for idx in sources:
        if idx >= len(attributes):
            raise IndexOutOfBoundsError(
                f"source index {idx} out of bounds for {len(attributes)} attributes"
            )
        total += attributes[idx]
    return total / len(sources)


def _clamp_signal(value: float) -> float:
    # Rounding in the source mean can drift a hair past the scale ends;
    # clamping keeps the [0, 100] invariant unconditional.
    return min(max(value, 0.0), SIGNAL_SCALE)


def derive_input_signals(attributes: Sequence[float], mapping: SignalMapping) -> InputSignals:
    """Map a record's [0,1] attributes to (pamp, danger, safe) on [0, 100].

    pamp and danger are 100 times the mean of their source attributes; safe
    is the same unless the mapping complements it, in which case it is
    ``100 * (1 - mean)``.
    """
    pamp = SIGNAL_SCALE * _source_mean(attributes, mapping.pamp_sources)
    danger = SIGNAL_SCALE * _source_mean(attributes, mapping.danger_sources)
    safe_mean = _source_mean(attributes, mapping.safe_sources)
    if mapping.safe_is_complement:
        safe = SIGNAL_SCALE * (1.0 - safe_mean)
    else:
        safe = SIGNAL_SCALE * safe_mean
    return InputSignals(
        pamp=_clamp_signal(pamp), danger=_clamp_signal(danger), safe=_clamp_signal(safe)
    )


def process_signals(inputs: InputSignals, weights: WeightMatrix) -> OutputSignals:
    """Plain weighted sum of the inputs, one output per matrix column."""
    csm = weights.pamp[0] * inputs.pamp + weights.danger[0] * inputs.danger + weights.safe[0] * inputs.safe
    semi = weights.pamp[1] * inputs.pamp + weights.danger[1] * inputs.danger + weights.safe[1] * inputs.safe
    mat = weights.pamp[2] * inputs.pamp + weights.danger[2] * inputs.danger + weights.safe[2] * inputs.safe
    return OutputSignals(csm=csm, semi=semi, mat=mat)


def accumulate(cum: CumulativeSignals, out: OutputSignals) -> CumulativeSignals:
    """Componentwise addition of one output triple onto the running totals."""
    return CumulativeSignals(
        cum_csm=cum.cum_csm + out.csm,
        cum_semi=cum.cum_semi + out.semi,
        cum_mat=cum.cum_mat + out.mat,
    )
