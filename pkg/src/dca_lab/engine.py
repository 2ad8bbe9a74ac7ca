"""Deterministic tick-based scheduler for the antigen/DC protocol.

One antigen spawns per logical tick and immediately sends 'picked' to k
distinct DCs; each delivery is followed by a migration check, migrating
DCs vote at once to every antigen they sampled and are replaced in place,
and completed antigens are finalized the moment their last context lands.
When the record stream is exhausted, a flush forces every sample-holding
DC to vote on its current cumulative values so no antigen is left behind.

Randomness comes from a single ``random.Random`` (Mersenne Twister)
stream seeded from the config, with a fixed draw order: the N initial
migration thresholds in DC-index order at world creation, then per tick
the k subset draws for the spawned antigen (one ``randrange`` each)
followed by one ``uniform`` replacement threshold per migration, in
migration order. Identical (config, records) therefore give identical
runs, including every rng-dependent field.
"""

from __future__ import annotations

import csv
import random
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Sequence

from .agents import (
    AntigenAgent,
    ContextMessage,
    ContextOverflowError,
    DCAgent,
    NotImmatureError,
    PickedMessage,
    antigen_handle_context,
    classify_antigen,
    dc_decide_context,
    dc_handle_picked,
    dc_should_migrate,
    sample_dcs,
)
from .analysis import (
    ClassificationResult,
    ConfusionCounts,
    MCAVHistogram,
    Metrics,
    build_histogram,
    compute_metrics,
)
from .data_ingest import AntigenRecord, AttributePolicy, EmptyDatasetError
from .signal_model import (
    DEFAULT_WEIGHT_MATRIX,
    SignalMapping,
    WeightMatrix,
    default_signal_mapping,
)

MAX_SEED = 2**64 - 1


class InvalidConfigError(ValueError):
    """A SimConfig invariant is violated."""


class EngineFaultError(RuntimeError):
    """An agent contract was violated mid-run; the simulation aborts."""


class UnflushableError(EngineFaultError):
    """An antigen still lacks contexts after flush."""


@dataclass(frozen=True)
class SimConfig:
    """Full run configuration; every field has a shipped default."""

    population_size: int = 100
    dcs_per_antigen: int = 10
    threshold_range: tuple[float, float] = (100.0, 300.0)
    weight_matrix: WeightMatrix = DEFAULT_WEIGHT_MATRIX
    signal_mapping: SignalMapping = field(default_factory=default_signal_mapping)
    anomalous_threshold: float = 0.5
    histogram_bins: int = 10
    attribute_policy: AttributePolicy = field(default_factory=AttributePolicy)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "threshold_range", tuple(self.threshold_range))

    def validate(self) -> None:
        if self.population_size < 1:
            raise InvalidConfigError(
                f"population_size must be >= 1, got {self.population_size}"
            )
        if not 1 <= self.dcs_per_antigen <= self.population_size:
            raise InvalidConfigError(
                f"dcs_per_antigen must be in [1, population_size={self.population_size}], "
                f"got {self.dcs_per_antigen}"
            )
        t_min, t_max = self.threshold_range
        if not 0 < t_min <= t_max:
            raise InvalidConfigError(
                f"threshold_range must satisfy 0 < t_min <= t_max, got [{t_min}, {t_max}]"
            )
        if not 0.0 <= self.anomalous_threshold <= 1.0:
            raise InvalidConfigError(
                f"anomalous_threshold must be in [0, 1], got {self.anomalous_threshold}"
            )
        if self.histogram_bins < 1:
            raise InvalidConfigError(
                f"histogram_bins must be >= 1, got {self.histogram_bins}"
            )
        if not 0 <= self.seed <= MAX_SEED:
            raise InvalidConfigError(
                f"seed must be a 64-bit unsigned integer, got {self.seed}"
            )


@dataclass
class World:
    """Complete simulation state; confined to one thread of control at a time."""

    tick: int
    pending: deque[AntigenRecord]
    dcs: list[DCAgent]
    antigens_in_flight: dict[int, AntigenAgent]
    results: list[ClassificationResult]
    rng: random.Random
    next_dc_id: int
    # Conservation bookkeeping: context bits handed to antigens, and samples
    # held by DCs at the moment they migrated or were flushed.
    contexts_delivered: int = 0
    samples_retired: int = 0


@dataclass(frozen=True)
class RunReport:
    results: list[ClassificationResult]
    confusion: ConfusionCounts
    metrics: Metrics
    histogram: MCAVHistogram
    config_echo: SimConfig
    seed: int


class TraceLog:
    """Optional CSV event trace: one ``tick,event_kind,ids,values`` row per event."""

    def __init__(self, stream: IO[str]):
        self._writer = csv.writer(stream)
        self._writer.writerow(["tick", "event_kind", "ids", "values"])

    def emit(self, tick: int, kind: str, ids, values=()) -> None:
        self._writer.writerow(
            [tick, kind, ";".join(str(i) for i in ids), ";".join(str(v) for v in values)]
        )


def _emit(trace: TraceLog | None, tick: int, kind: str, ids, values=()) -> None:
    if trace is not None:
        trace.emit(tick, kind, ids, values)


def init_world(config: SimConfig, records: Sequence[AntigenRecord]) -> World:
    """Create N immature DCs (thresholds drawn in DC-index order) at tick 0."""
    config.validate()
    if not records:
        raise EmptyDatasetError("cannot initialize a world with zero records")
    t_min, t_max = config.threshold_range
    rng = random.Random(config.seed)
    dcs = [
        DCAgent(dc_id=i, migration_threshold=rng.uniform(t_min, t_max))
        for i in range(config.population_size)
    ]
    return World(
        tick=0,
        pending=deque(sorted(records, key=lambda r: r.antigen_id)),
        dcs=dcs,
        antigens_in_flight={},
        results=[],
        rng=rng,
        next_dc_id=config.population_size,
    )


def _finalize_antigen(
    world: World, config: SimConfig, ag: AntigenAgent, trace: TraceLog | None
) -> None:
    ag.predicted = classify_antigen(ag.mcav, config.anomalous_threshold)
    world.results.append(
        ClassificationResult(
            antigen_id=ag.antigen_id,
            mcav=ag.mcav,
            predicted=ag.predicted,
            actual=ag.true_label,
        )
    )
    del world.antigens_in_flight[ag.antigen_id]
    _emit(trace, world.tick, "finalize", [ag.antigen_id], [ag.mcav, ag.predicted.value])


def _deliver_contexts(
    world: World, config: SimConfig, dc: DCAgent, bit: int, trace: TraceLog | None
) -> None:
    """Send the DC's context bit to every sampled antigen, in order, with multiplicity."""
    for antigen_id in dc.sampled:
        ag = world.antigens_in_flight.get(antigen_id)
        if ag is None:
            raise EngineFaultError(
                f"tick {world.tick}: DC {dc.dc_id} voted for antigen {antigen_id} "
                "which is not in flight"
            )
        try:
            antigen_handle_context(ag, ContextMessage(dc.dc_id, bit))
        except ContextOverflowError as exc:
            raise EngineFaultError(f"tick {world.tick}: {exc}") from exc
        world.contexts_delivered += 1
        _emit(trace, world.tick, "context", [dc.dc_id, antigen_id], [bit])
        if len(ag.received) == ag.expected_contexts:
            _finalize_antigen(world, config, ag, trace)
    world.samples_retired += len(dc.sampled)


def _migrate(
    world: World, config: SimConfig, position: int, trace: TraceLog | None
) -> None:
    """Decide, vote, then replace the DC in place with a fresh immature one.

    The replacement threshold is drawn after the votes, keeping the rng
    draw order spawn-picks-then-replacements within each tick.
    """
    dc = world.dcs[position]
    state, bit = dc_decide_context(dc)
    dc.state = state
    _emit(trace, world.tick, "migrate", [dc.dc_id], [state.value, bit])
    _deliver_contexts(world, config, dc, bit, trace)
    t_min, t_max = config.threshold_range
    replacement = DCAgent(
        dc_id=world.next_dc_id,
        migration_threshold=world.rng.uniform(t_min, t_max),
    )
    world.next_dc_id += 1
    world.dcs[position] = replacement
    _emit(trace, world.tick, "replace", [dc.dc_id, replacement.dc_id],
          [replacement.migration_threshold])


def step(world: World, config: SimConfig, trace: TraceLog | None = None) -> World:
    """Execute one logical tick.

    Order within the tick: spawn the head record (if any), deliver its k
    picks in pick order with a migration check after each delivery,
    migrating DCs vote immediately and are replaced at the same list
    position, and any antigen reaching k contexts is finalized on the spot.
    The DC population size is invariant across the tick.
    """
    if world.pending:
        record = world.pending.popleft()
        k = config.dcs_per_antigen
        ag = AntigenAgent(
            antigen_id=record.antigen_id,
            attributes=record.attributes,
            true_label=record.true_label,
            expected_contexts=k,
        )
        world.antigens_in_flight[ag.antigen_id] = ag
        _emit(trace, world.tick, "spawn", [ag.antigen_id], [ag.true_label.value])

        picked = sample_dcs([dc.dc_id for dc in world.dcs], k, world.rng)
        position_of = {dc.dc_id: i for i, dc in enumerate(world.dcs)}
        msg = PickedMessage(antigen_id=ag.antigen_id, attributes=ag.attributes)
        for dc_id in picked:
            position = position_of[dc_id]
            dc = world.dcs[position]
            try:
                dc_handle_picked(dc, msg, config.signal_mapping, config.weight_matrix)
            except NotImmatureError as exc:
                raise EngineFaultError(f"tick {world.tick}: {exc}") from exc
            _emit(trace, world.tick, "pick", [ag.antigen_id, dc_id])
            if dc_should_migrate(dc):
                _migrate(world, config, position, trace)
    world.tick += 1
    return world


def flush(world: World, config: SimConfig, trace: TraceLog | None = None) -> World:
    """Force every sample-holding DC to vote on its current cumulative values.

    Sample-free DCs are discarded silently; afterwards no antigen may
    remain in flight and population accounting ends.
    """
    if world.pending:
        raise EngineFaultError("flush called with records still pending")
    for dc in world.dcs:
        if dc.sampled:
            state, bit = dc_decide_context(dc)
            dc.state = state
            _emit(trace, world.tick, "flush_migrate", [dc.dc_id], [state.value, bit])
            _deliver_contexts(world, config, dc, bit, trace)
        else:
            _emit(trace, world.tick, "discard", [dc.dc_id])
    world.dcs.clear()
    if world.antigens_in_flight:
        raise UnflushableError(
            f"{len(world.antigens_in_flight)} antigens still lack contexts after flush"
        )
    return world


def _check_mapping_fits(config: SimConfig, records: Sequence[AntigenRecord]) -> None:
    mapping = config.signal_mapping
    max_index = max(
        max(mapping.pamp_sources), max(mapping.danger_sources), max(mapping.safe_sources)
    )
    shortest = min(len(r.attributes) for r in records)
    if max_index >= shortest:
        raise InvalidConfigError(
            f"signal mapping references attribute index {max_index} but a record "
            f"has only {shortest} attributes"
        )


def run(
    config: SimConfig,
    records: Sequence[AntigenRecord],
    trace: TraceLog | None = None,
) -> RunReport:
    """Run the full simulation: init, one tick per record, flush, analyse.

    A deterministic function of (config, records): identical inputs give
    identical reports, including every rng-dependent field.
    """
    config.validate()
    if not records:
        raise EmptyDatasetError("cannot run on zero records")
    _check_mapping_fits(config, records)
    world = init_world(config, records)
    while world.pending:
        step(world, config, trace)
    flush(world, config, trace)

    confusion, metrics = compute_metrics(world.results)
    histogram = build_histogram([r.mcav for r in world.results], config.histogram_bins)
    return RunReport(
        results=world.results,
        confusion=confusion,
        metrics=metrics,
        histogram=histogram,
        config_echo=config,
        seed=config.seed,
    )
