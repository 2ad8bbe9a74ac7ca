"""The Antigen and DC agent state machines and their decision rules.

Antigen agents carry one data record each and collect one context bit per
DC that sampled them; DC agents fuse signals from picked antigens until
their cumulative csm exceeds an individually assigned migration threshold,
then vote 0 (semimature) or 1 (mature) to every antigen they sampled.
All transitions are plain functions invoked by the engine; no agent owns
a thread.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .signal_model import (
    CumulativeSignals,
    SignalMapping,
    WeightMatrix,
    accumulate,
    derive_input_signals,
    process_signals,
)


class Category(Enum):
    """The two classification outcomes. Anomalous is the positive class."""

    NORMAL = "normal"
    ANOMALOUS = "anomalous"


class DCState(Enum):
    """DC lifecycle. Immature may become Semimature or Mature; both are terminal."""

    IMMATURE = "immature"
    SEMIMATURE = "semimature"
    MATURE = "mature"


class SampleTooLargeError(ValueError):
    """Asked for more distinct DCs than the population holds."""


class NotImmatureError(RuntimeError):
    """A matured DC received a 'picked' message (an engine bug)."""


class ContextOverflowError(RuntimeError):
    """An antigen received more contexts than DCs sampled it (an engine bug)."""


class EmptyContextsError(ValueError):
    """MCAV requested for an empty context list."""


@dataclass
class DCAgent:
    """A data processor: accumulates signals over picks until it migrates.

    The migration threshold is drawn once at creation and never mutated.
    ``sampled`` records the antigen ids of every handled pick, in order,
    duplicates allowed; each occurrence earns its own context message.
    """

    dc_id: int
    migration_threshold: float
    state: DCState = DCState.IMMATURE
    cum: CumulativeSignals = field(default_factory=CumulativeSignals)
    sampled: list[int] = field(default_factory=list)


@dataclass
class AntigenAgent:
    """A data carrier: one record, awaiting one context bit per DC pick.

    ``mcav`` and ``predicted`` stay None until all ``expected_contexts``
    bits have arrived.
    """

    antigen_id: int
    attributes: tuple[float, ...]
    true_label: Category
    expected_contexts: int
    received: list[int] = field(default_factory=list)
    mcav: float | None = None
    predicted: Category | None = None


@dataclass(frozen=True)
class PickedMessage:
    """Sent by an antigen to each selected DC; carries a copy of its attributes."""

    antigen_id: int
    attributes: tuple[float, ...]


@dataclass(frozen=True)
class ContextMessage:
    """A single vote: 0 for the semimature verdict, 1 for the mature verdict."""

    dc_id: int
    context: int


def sample_dcs(population_ids: Sequence[int], k: int, rng: random.Random) -> list[int]:
    """Draw a uniform k-subset of DC ids, in selection order.

    Uses a partial Fisher-Yates shuffle: exactly k ``rng.randrange`` calls,
    so replaying the same generator state reproduces the same picks.
    """
    n = len(population_ids)
    if k < 0:
        raise ValueError(f"sample size must be nonnegative, got {k}")
    if k > n:
        raise SampleTooLargeError(f"cannot pick {k} distinct DCs from a population of {n}")
    pool = list(population_ids)
    for i in range(k):
        j = i + rng.randrange(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def dc_handle_picked(
    dc: DCAgent,
    msg: PickedMessage,
    mapping: SignalMapping,
    weights: WeightMatrix,
) -> DCAgent:
    """Process one 'picked' message: record the antigen and accumulate signals."""
    if dc.state is not DCState.IMMATURE:
        raise NotImmatureError(
            f"DC {dc.dc_id} received a pick while {dc.state.value}"
        )
    dc.sampled.append(msg.antigen_id)
    out = process_signals(derive_input_signals(msg.attributes, mapping), weights)
    dc.cum = accumulate(dc.cum, out)
    return dc


def dc_should_migrate(dc: DCAgent) -> bool:
    """True iff cumulative csm strictly exceeds the migration threshold."""
    return dc.cum.cum_csm > dc.migration_threshold


def dc_decide_context(dc: DCAgent) -> tuple[DCState, int]:
    """Differentiation decision on the current cumulative values.

    Semimature (context 0) iff cum_semi > cum_mat; ties go to Mature
    (context 1). Does not mutate the DC; the engine applies the state.
    """
    if dc.cum.cum_semi > dc.cum.cum_mat:
        return DCState.SEMIMATURE, 0
    return DCState.MATURE, 1


def antigen_handle_context(ag: AntigenAgent, msg: ContextMessage) -> AntigenAgent:
    """Append one context bit; compute the MCAV once the last bit arrives."""
    if len(ag.received) >= ag.expected_contexts:
        raise ContextOverflowError(
            f"antigen {ag.antigen_id} already holds {len(ag.received)} of "
            f"{ag.expected_contexts} contexts"
        )
    ag.received.append(msg.context)
    if len(ag.received) == ag.expected_contexts:
        ag.mcav = compute_mcav(ag.received)
    return ag


def compute_mcav(contexts: Sequence[int]) -> float:
    """Fraction of context bits equal to 1: the antigen's anomaly probability."""
    if not contexts:
        raise EmptyContextsError("MCAV needs at least one context")
    return sum(contexts) / len(contexts)


def classify_antigen(mcav: float, anomalous_threshold: float) -> Category:
    """Anomalous iff mcav strictly exceeds the threshold; Normal otherwise."""
    return Category.ANOMALOUS if mcav > anomalous_threshold else Category.NORMAL
