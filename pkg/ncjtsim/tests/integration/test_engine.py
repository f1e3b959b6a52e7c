"""
Integration tests for the TTI loop

Bit conservation, the feedback-delay pipeline, determinism, a closed-form
single-link download and the per-scheme grid structure, all on small
four-TRP worlds.
"""

import math

import numpy as np
import pytest

import ncjtsim.core.engine as engine
from ncjtsim.core.engine import build_world, run_simulation, step_tti
from ncjtsim.core.events import TraceBus, TraceEventTypes
from ncjtsim.core.grid import BLANK, IDLE
from ncjtsim.core.stats import collect_percentiles
from ncjtsim.core.traffic import TrafficFile


def run_steps(world, n):
    for _ in range(n):
        step_tti(world)
    return world


class TestConservation:

    @pytest.mark.parametrize("scheme", ["dps", "fncjt", "nfncjt", "none"])
    def test_delivered_bits_accounted_for(self, make_config, scheme):
        """Test delivered bits equal completed plus in-flight bits"""
        world = run_steps(build_world(make_config(run={"scheme": scheme}), seed=3), 300)

        completed = sum(s.file_bits for s in world.samples)
        in_flight = sum(f.size - f.remaining_bits for buf in world.buffers for f in buf)

        assert world.delivered_bits > 0
        assert world.delivered_bits == pytest.approx(completed + in_flight, rel=1e-9)

    def test_samples_have_positive_duration(self, small_world):
        """Test every sample lasts at least one TTI"""
        run_steps(small_world, 300)

        for s in small_world.samples:
            assert s.duration >= small_world.clock.tti_duration
            assert s.completion_tti >= s.arrival_tti

    def test_warmup_arrivals_excluded(self, make_config):
        """Test files arriving during warm-up give no samples"""
        world = run_steps(build_world(make_config(run={"warmup_ttis": 150}), seed=3), 300)

        assert all(s.arrival_tti >= 150 for s in world.samples)


class TestWorkConservation:
    """A TRP with an eligible backlogged user never leaves a PRB IDLE once CSI exists"""

    @staticmethod
    def eligible(world, trp_id, active):
        cs = world.comp_sets[world.trp_set[trp_id]]
        users = world.own_users(trp_id) if world.scheme == "none" else cs.user_vector
        return set(users) & set(active)

    @pytest.mark.parametrize("scheme", ["dps", "fncjt", "nfncjt", "none"])
    def test_no_idle_prb_with_eligible_users(self, make_config, mocker, scheme):
        """Test TRPs with eligible users transmit or blank on every PRB"""
        real = engine.schedule
        calls = []

        def record(world, table, active):
            grid = real(world, table, active)
            calls.append((world.clock.tti, list(active), grid.users.copy()))
            return grid

        mocker.patch.object(engine, "schedule", side_effect=record)
        config = make_config(run={"scheme": scheme}, traffic={"lambda_per_s": 200.0})
        world = run_steps(build_world(config, seed=8), 150)

        assert calls
        for tti, active, users in calls:
            assert tti >= world.config.phy.feedback_delay
            for trp in world.trps:
                if self.eligible(world, trp.id, active):
                    assert not np.any(users[trp.id] == IDLE), f"TRP {trp.id} idle at TTI {tti}"
                else:
                    assert np.all(users[trp.id] == IDLE)

    def test_scheduled_whenever_backlogged(self, make_config, mocker):
        """Test the scheduler runs every TTI after the delay while some buffer is backlogged"""
        spy = mocker.spy(engine, "schedule")
        world = build_world(make_config(traffic={"lambda_per_s": 400.0}), seed=8)
        delay = world.config.phy.feedback_delay

        for _ in range(100):
            tti = world.clock.tti
            before = spy.call_count
            step_tti(world)
            backlogged = any(b.active for b in world.buffers) or np.any(world.last_grid.users >= 0)
            if tti >= delay and backlogged:
                assert spy.call_count == before + 1


class TestFeedbackDelay:

    @pytest.mark.parametrize("delay", [0, 2, 5])
    def test_schedules_on_report_measured_delay_ttis_ago(self, make_config, delay):
        """Test scheduling consumes the report measured delay TTIs earlier"""
        world = build_world(make_config(phy={"feedback_delay": delay}, traffic={"lambda_per_s": 200.0}), seed=5)

        for _ in range(120):
            tti = world.clock.tti
            step_tti(world)
            if tti < delay:
                assert np.all(world.last_grid.users == IDLE)
            elif np.any(world.last_grid.users >= 0):
                assert world.consumed_csi_tti == tti - delay

    def test_queue_holds_delay_plus_one_tables(self, make_config):
        """Test the CSI queue keeps delay plus one tables"""
        world = run_steps(build_world(make_config(phy={"feedback_delay": 3}), seed=1), 10)

        assert [t.measured_tti for t in world.csi_queue] == [6, 7, 8, 9]


class TestDeterminism:

    @pytest.mark.parametrize("scheme", ["dps", "nfncjt"])
    def test_same_seed_same_samples(self, make_config, scheme):
        """Test one seed reproduces the same samples"""
        config = make_config(run={"scheme": scheme})

        a = run_simulation(config, seed=11)
        b = run_simulation(config, seed=11)

        assert a.digest == b.digest
        assert a.samples == b.samples
        assert a.delivered_bits == b.delivered_bits

    def test_different_seed_different_world(self, make_config):
        """Test different seeds draw different channels"""
        config = make_config()
        a = build_world(config, seed=1)
        b = build_world(config, seed=2)

        assert not np.array_equal(a.channel.fading, b.channel.fading)

    def test_singleton_nfncjt_matches_no_coordination(self, make_config):
        """Test NF-NCJT with singleton sets reproduces no coordination"""
        nf = run_simulation(make_config(run={"scheme": "nfncjt", "max_coord": 1}), seed=4)
        base = run_simulation(make_config(run={"scheme": "none", "max_coord": 2}), seed=4)

        assert nf.digest == base.digest
        assert collect_percentiles(nf.samples) == collect_percentiles(base.samples)


class TestSingleLink:
    """One TRP, one UE, frozen channel: download time is ceil(bits / bits per TTI)"""

    @pytest.fixture
    def config(self, make_config):
        return make_config(
            run={"scheme": "none", "users_per_trp": 1, "max_coord": 1, "warmup_ttis": 0},
            deployment={"trp_count": 1},
            phy={"feedback_delay": 0},
            channel={"rho": 1.0},
            traffic={"lambda_per_s": 1e-9},
        )

    def test_closed_form_duration(self, config):
        """Test a single download finishes after ceil(bits / rate) TTIs"""
        calibration = build_world(config, seed=2)
        calibration.buffers[0].push(TrafficFile(0, size=10 ** 12))
        run_steps(calibration, 2)
        per_tti = calibration.delivered_bits / 2
        assert per_tti > 0

        size = int(10.5 * per_tti)
        world = build_world(config, seed=2)
        world.buffers[0].push(TrafficFile(0, size=size))
        run_steps(world, 20)

        (sample,) = world.samples
        assert sample.duration == pytest.approx(math.ceil(size / per_tti) * 1e-3)
        assert sample.throughput == pytest.approx(size / (11 * 1e-3))

    def test_idle_without_traffic(self, config):
        """Test an empty buffer leaves every PRB idle"""
        world = run_steps(build_world(config, seed=2), 5)

        assert world.delivered_bits == 0
        assert world.utilisation.idle.tolist() == [5 * config.carrier.n_prb]


class TestGridStructure:
    """Per-scheme allocation patterns observed every TTI"""

    def _grids(self, config, n=150):
        world = build_world(config, seed=6)
        for _ in range(n):
            step_tti(world)
            yield world, world.last_grid

    def test_dps_one_transmitter_per_set(self, make_config):
        """Test DPS has at most one transmitter per set and PRB"""
        for world, grid in self._grids(make_config(run={"scheme": "dps"})):
            for cs in world.comp_sets:
                rows = grid.users[list(cs.trp_ids)]
                tx = (rows >= 0).sum(axis=0)
                assert np.all(tx <= 1)
                busy = tx == 1
                assert np.all((rows[:, busy] >= 0) | (rows[:, busy] == BLANK))
                assert np.all(rows[:, ~busy] == IDLE)

    def test_fncjt_full_overlap(self, make_config):
        """Test F-NCJT assigns identical rows across the set"""
        for world, grid in self._grids(make_config(run={"scheme": "fncjt"})):
            for cs in world.comp_sets:
                rows = grid.users[list(cs.trp_ids)]
                assert np.all(rows == rows[0])

    def test_nfncjt_serves_set_users_only(self, make_config):
        """Test NF-NCJT TRPs serve users of their own set"""
        for world, grid in self._grids(make_config(run={"scheme": "nfncjt"})):
            for trp in world.trps:
                cs = world.comp_sets[world.trp_set[trp.id]]
                served = set(grid.users[trp.id][grid.users[trp.id] >= 0].tolist())
                assert served <= set(cs.user_vector)
            assert not np.any(grid.users == BLANK)

    def test_utilisation_counts_every_prb(self, make_config):
        """Test utilisation shares add up to one per TRP"""
        config = make_config(run={"scheme": "dps"})
        result = run_simulation(config, seed=2)
        util = result.utilisation

        total = util.transmitting + util.blank + util.idle
        assert total.tolist() == [config.run.ttis * config.carrier.n_prb] * 4
        for row in util.rows():
            assert row["transmitting"] + row["blank"] + row["idle"] == pytest.approx(1.0)


class TestTraces:

    def test_grid_and_sinr_events_per_tti(self, small_config):
        """Test grid and SINR events are published every TTI"""
        bus = TraceBus()
        grids, sinr = [], []
        bus.subscribe(TraceEventTypes.GRID, grids.append)
        bus.subscribe(TraceEventTypes.SINR, sinr.append)

        world = run_steps(build_world(small_config, seed=7, trace=bus), 20)

        assert [e.tti for e in grids] == list(range(20))
        assert all(len(e.rows) == 4 * 6 for e in grids)
        assert len(sinr) == 20
        layers = sum(len(e.rows) for e in sinr)
        assert layers == world.utilisation.layers

    def test_no_events_without_subscribers(self, small_config):
        """Test nothing is published without subscribers"""
        bus = TraceBus()
        run_steps(build_world(small_config, seed=7, trace=bus), 5)

        assert bus.get_stats()["events_published"] == 0
