"""Scheduler behavior: spawning, migration, replacement, flush, determinism."""

import csv
import io
import random
from collections import deque

import pytest

from conftest import make_records, oracle_kwargs, random_sim_setup, write_wbc_like_file
from oracle import run_reference_dca

from dca_lab.agents import AntigenAgent, Category, DCAgent, DCState
from dca_lab.data_ingest import AntigenRecord, EmptyDatasetError, load_dataset
from dca_lab.engine import (
    EngineFaultError,
    InvalidConfigError,
    SimConfig,
    TraceLog,
    World,
    flush,
    init_world,
    run,
    step,
)
from dca_lab.signal_model import CumulativeSignals, SignalMapping


def small_config(**overrides) -> SimConfig:
    defaults = dict(
        population_size=10,
        dcs_per_antigen=3,
        signal_mapping=SignalMapping((0, 1), (0, 1), (0, 1)),
        seed=7,
    )
    defaults.update(overrides)
    return SimConfig(**defaults)


def run_world(config, records):
    """Drive a full run while keeping the World visible for invariant checks."""
    world = init_world(config, records)
    while world.pending:
        step(world, config)
    flush(world, config)
    return world


class TestSimConfig:
    def test_defaults_are_valid(self):
        SimConfig().validate()

    def test_population_must_be_positive(self):
        with pytest.raises(InvalidConfigError):
            SimConfig(population_size=0).validate()

    def test_k_cannot_exceed_population(self):
        with pytest.raises(InvalidConfigError):
            SimConfig(population_size=5, dcs_per_antigen=6).validate()

    def test_threshold_range_must_be_positive_and_ordered(self):
        with pytest.raises(InvalidConfigError):
            SimConfig(threshold_range=(0.0, 10.0)).validate()
        with pytest.raises(InvalidConfigError):
            SimConfig(threshold_range=(10.0, 5.0)).validate()

    def test_anomalous_threshold_bounds(self):
        with pytest.raises(InvalidConfigError):
            SimConfig(anomalous_threshold=1.5).validate()

    def test_seed_bounds(self):
        with pytest.raises(InvalidConfigError):
            SimConfig(seed=2**64).validate()
        with pytest.raises(InvalidConfigError):
            SimConfig(seed=-1).validate()


class TestInitWorld:
    def test_construction_contract(self):
        rng = random.Random(0)
        config = SimConfig(population_size=100, seed=5)
        world = init_world(config, make_records(rng, 3, 9))
        assert len(world.dcs) == 100
        assert all(dc.state is DCState.IMMATURE for dc in world.dcs)
        t_min, t_max = config.threshold_range
        assert all(t_min <= dc.migration_threshold <= t_max for dc in world.dcs)
        assert world.tick == 0
        assert world.next_dc_id == 100

    def test_same_seed_same_thresholds(self):
        rng = random.Random(0)
        records = make_records(rng, 3, 9)
        config = SimConfig(seed=99)
        first = [dc.migration_threshold for dc in init_world(config, records).dcs]
        second = [dc.migration_threshold for dc in init_world(config, records).dcs]
        assert first == second

    def test_invalid_config_rejected(self):
        rng = random.Random(0)
        with pytest.raises(InvalidConfigError):
            init_world(SimConfig(population_size=0), make_records(rng, 3, 9))

    def test_empty_records_rejected(self):
        with pytest.raises(EmptyDatasetError):
            init_world(SimConfig(), [])

    def test_pending_in_antigen_id_order(self):
        rng = random.Random(0)
        records = make_records(rng, 5, 2)
        world = init_world(small_config(), list(reversed(records)))
        assert [r.antigen_id for r in world.pending] == [0, 1, 2, 3, 4]


class TestStep:
    def test_quiescent_tick_only_increments(self):
        rng = random.Random(1)
        config = small_config()
        world = init_world(config, make_records(rng, 1, 2))
        step(world, config)
        snapshot = ([dc.dc_id for dc in world.dcs], len(world.results), world.contexts_delivered)
        tick_before = world.tick
        step(world, config)
        assert world.tick == tick_before + 1
        assert ([dc.dc_id for dc in world.dcs], len(world.results), world.contexts_delivered) == snapshot

    def test_population_constant_after_every_step(self):
        rng = random.Random(2)
        config = small_config(population_size=8, dcs_per_antigen=8)
        world = init_world(config, make_records(rng, 30, 2))
        for _ in range(40):
            step(world, config)
            assert len(world.dcs) == 8

    def test_spawn_delivers_exactly_k_picks(self):
        rng = random.Random(3)
        config = small_config(dcs_per_antigen=3)
        records = make_records(rng, 2, 2)
        buffer = io.StringIO()
        trace = TraceLog(buffer)
        world = init_world(config, records)
        step(world, config, trace)
        rows = list(csv.DictReader(io.StringIO(buffer.getvalue())))
        spawns = [r for r in rows if r["event_kind"] == "spawn"]
        picks = [r for r in rows if r["event_kind"] == "pick"]
        assert len(spawns) == 1
        assert spawns[0]["ids"] == "0"
        assert len(picks) == 3

    def test_replacements_get_fresh_ids_at_same_position(self):
        # All-max attributes force immediate migration on every pick.
        config = small_config(
            population_size=4,
            dcs_per_antigen=2,
            threshold_range=(100.0, 299.0),
            signal_mapping=SignalMapping((0,), (0,), (0,)),
        )
        records = [
            AntigenRecord(0, 0, (1.0,), Category.ANOMALOUS),
        ]
        world = init_world(config, records)
        ids_before = [dc.dc_id for dc in world.dcs]
        step(world, config)
        ids_after = [dc.dc_id for dc in world.dcs]
        assert len(ids_after) == 4
        replaced = [new for new, old in zip(ids_after, ids_before) if new != old]
        assert len(replaced) == 2
        assert all(new >= 4 for new in replaced)
        assert all(dc.state is DCState.IMMATURE for dc in world.dcs)


class TestFlush:
    def test_semimature_flush_returns_zero_contexts(self):
        dc = DCAgent(dc_id=0, migration_threshold=1000.0)
        dc.cum = CumulativeSignals(cum_csm=50.0, cum_semi=10.0, cum_mat=5.0)
        dc.sampled = [3, 7]
        antigens = {
            aid: AntigenAgent(
                antigen_id=aid,
                attributes=(0.5,),
                true_label=Category.NORMAL,
                expected_contexts=1,
            )
            for aid in (3, 7)
        }
        world = World(
            tick=5,
            pending=deque(),
            dcs=[dc],
            antigens_in_flight=dict(antigens),
            results=[],
            rng=random.Random(0),
            next_dc_id=1,
        )
        config = SimConfig(population_size=1, dcs_per_antigen=1)
        flush(world, config)
        assert dc.state is DCState.SEMIMATURE
        assert {r.antigen_id: r.mcav for r in world.results} == {3: 0.0, 7: 0.0}
        assert all(r.predicted is Category.NORMAL for r in world.results)
        assert not world.antigens_in_flight

    def test_empty_sampled_discarded_silently(self):
        world = World(
            tick=0,
            pending=deque(),
            dcs=[DCAgent(dc_id=0, migration_threshold=10.0)],
            antigens_in_flight={},
            results=[],
            rng=random.Random(0),
            next_dc_id=1,
        )
        flush(world, SimConfig(population_size=1, dcs_per_antigen=1))
        assert world.dcs == []
        assert world.contexts_delivered == 0

    def test_flush_with_pending_is_engine_fault(self):
        rng = random.Random(4)
        config = small_config()
        world = init_world(config, make_records(rng, 2, 2))
        with pytest.raises(EngineFaultError):
            flush(world, config)

    def test_unreachable_thresholds_resolve_everything_at_flush(self):
        rng = random.Random(12)
        records = make_records(rng, 15, 2)
        config = small_config(threshold_range=(1e9, 1e9 + 1.0), seed=3)
        world = init_world(config, records)
        while world.pending:
            step(world, config)
        assert world.contexts_delivered == 0  # nobody migrated mid-run
        flush(world, config)
        assert world.contexts_delivered == 15 * config.dcs_per_antigen
        assert len(world.results) == 15
        assert not world.antigens_in_flight

    def test_flush_order_matches_reference_loop(self):
        rng = random.Random(13)
        records = make_records(rng, 15, 2)
        config = small_config(threshold_range=(1e9, 1e9 + 1.0), seed=3)
        report = run(config, records)
        expected = run_reference_dca(
            [(r.antigen_id, r.attributes) for r in records], **oracle_kwargs(config)
        )
        assert {r.antigen_id: r.mcav for r in report.results} == expected


class TestRun:
    def test_identical_inputs_identical_reports(self):
        rng = random.Random(5)
        config = small_config(seed=123)
        records = make_records(rng, 25, 2)
        assert run(config, records) == run(config, records)

    def test_every_record_classified_exactly_once(self):
        rng = random.Random(6)
        config = small_config()
        records = make_records(rng, 40, 2)
        report = run(config, records)
        assert len(report.results) == 40
        assert sorted(r.antigen_id for r in report.results) == list(range(40))

    def test_context_conservation_and_completeness(self):
        rng = random.Random(7)
        records = make_records(rng, 35, 3)
        config = SimConfig(
            population_size=6,
            dcs_per_antigen=4,
            signal_mapping=SignalMapping((0, 2), (1,), (0, 1, 2)),
            seed=11,
        )
        world = run_world(config, records)
        assert world.contexts_delivered == world.samples_retired
        assert world.contexts_delivered == len(records) * config.dcs_per_antigen
        assert not world.antigens_in_flight
        assert len(world.results) == len(records)

    def test_matches_reference_loop_on_twenty_records(self):
        rng = random.Random(8)
        records = make_records(rng, 20, 4)
        config = SimConfig(
            population_size=10,
            dcs_per_antigen=3,
            signal_mapping=SignalMapping((0, 1), (2, 3), (0, 3)),
            seed=4242,
        )
        report = run(config, records)
        expected = run_reference_dca(
            [(r.antigen_id, r.attributes) for r in records], **oracle_kwargs(config)
        )
        assert {r.antigen_id: r.mcav for r in report.results} == expected

    def test_all_max_records_all_vote_one(self):
        records = [
            AntigenRecord(i, i, (1.0,) * 9, Category.ANOMALOUS) for i in range(8)
        ]
        config = SimConfig(population_size=10, dcs_per_antigen=3, seed=1)
        report = run(config, records)
        assert all(r.mcav == 1.0 for r in report.results)
        assert all(r.predicted is Category.ANOMALOUS for r in report.results)
        assert report.metrics.accuracy == 1.0

    def test_mapping_index_beyond_attributes_rejected(self):
        rng = random.Random(9)
        records = make_records(rng, 5, 2)
        config = SimConfig(
            population_size=5,
            dcs_per_antigen=2,
            signal_mapping=SignalMapping((0,), (0, 5), (1,)),
        )
        with pytest.raises(InvalidConfigError):
            run(config, records)

    def test_histogram_counts_all_results(self):
        rng = random.Random(10)
        config = small_config()
        records = make_records(rng, 30, 2)
        report = run(config, records)
        assert sum(report.histogram.counts) == len(report.results)

    def test_replicated_antigen_mcav_is_exact_vote_fraction(self):
        # The same record replicated 40 times: each replica's MCAV must be an
        # exact ratio of 1-votes to k, and the replicas spread over [0, 1]
        # like the anomaly probability they estimate.
        attrs = (0.6, 0.4, 0.7)
        records = [AntigenRecord(i, i, attrs, Category.ANOMALOUS) for i in range(40)]
        config = SimConfig(
            population_size=12,
            dcs_per_antigen=6,
            threshold_range=(200.0, 900.0),
            signal_mapping=SignalMapping((0,), (1,), (2,)),
            seed=17,
        )
        report = run(config, records)
        k = config.dcs_per_antigen
        for result in report.results:
            ones = result.mcav * k
            assert ones == int(ones)
            assert result.mcav == int(ones) / k


class TestRandomizedOracleParity:
    def test_ten_random_setups(self):
        meta = random.Random(20240917)
        for _ in range(10):
            config, records = random_sim_setup(meta)
            report = run(config, records)
            expected = run_reference_dca(
                [(r.antigen_id, r.attributes) for r in records], **oracle_kwargs(config)
            )
            assert {r.antigen_id: r.mcav for r in report.results} == expected


class TestDeskScaleShape:
    """Structure-matched synthetic stand-in for the reference dataset."""

    def test_wbc_shaped_counts_and_separation(self, tmp_path):
        path = tmp_path / "wbc-shaped.data"
        write_wbc_like_file(path)
        with open(path, "rb") as handle:
            records, summary = load_dataset(handle)
        assert summary.rows_read == 699
        assert summary.rows_skipped == 16
        assert summary.records_produced == 683

        report = run(SimConfig(seed=3), records)
        assert len(report.results) == 683
        assert report.metrics.mean_mcav_anomalous > report.metrics.mean_mcav_normal
