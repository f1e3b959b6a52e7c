"""
TTI loop

Owns one simulated world: traffic arrivals, fading evolution, the CSI
measurement and feedback-delay pipeline, scheduling, per-layer SINR
evaluation, bit delivery, PF updates and throughput sample collection.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional

import numpy as np

from ncjtsim.core.channel import ChannelState, LinkBudgetSampler, subband_of_prb
from ncjtsim.core.config import RunConfig
from ncjtsim.core.events import TraceBus, TraceEvent, TraceEventTypes
from ncjtsim.core.grid import BLANK, IDLE, ScheduleGrid
from ncjtsim.core.phy import CsiTable, draw_hypothesis_precoders, evaluate_grid, measure_csi_table
from ncjtsim.core.scheduler import (
    CENTRALIZED, DISTRIBUTED, LocalCsiView, PfState, SetCsiView, pf_update,
)
from ncjtsim.core.stats import ThroughputSample, sample_digest
from ncjtsim.core.topology import (
    CompSet, LayoutParams, Trp, Ue, build_indoor_layout, comp_set_of, drop_users, form_comp_sets,
)
from ncjtsim.core.traffic import UeBuffer, arrival_rate, spawn_arrivals

logger = logging.getLogger("ncjtsim.engine")

_STREAMS = ("drop", "fading_init", "fading", "csi", "csi_error", "traffic")


@dataclass
class SimClock:
    tti: int = 0
    tti_duration: float = 1e-3
    n_prb: int = 50

    def advance(self) -> None:
        self.tti += 1


@dataclass
class Utilisation:
    """PRB usage counters per TRP plus realised layer statistics"""
    transmitting: np.ndarray
    blank: np.ndarray
    idle: np.ndarray
    layers: int = 0
    se_sum: float = 0.0
    scheduled_prb_ue: int = 0

    @classmethod
    def empty(cls, n_trp: int) -> "Utilisation":
        return cls(np.zeros(n_trp, dtype=int), np.zeros(n_trp, dtype=int), np.zeros(n_trp, dtype=int))

    def rows(self) -> List[dict]:
        rows = []
        for t in range(len(self.transmitting)):
            total = max(self.transmitting[t] + self.blank[t] + self.idle[t], 1)
            rows.append({"trp": t, "transmitting": self.transmitting[t] / total,
                         "blank": self.blank[t] / total, "idle": self.idle[t] / total})
        return rows

    @property
    def mean_layer_se(self) -> float:
        return self.se_sum / self.layers if self.layers else 0.0

    @property
    def layers_per_scheduled_prb(self) -> float:
        return self.layers / self.scheduled_prb_ue if self.scheduled_prb_ue else 0.0


@dataclass
class World:
    config: RunConfig
    seed: int
    trps: List[Trp]
    ues: List[Ue]
    comp_sets: List[CompSet]
    trp_set: np.ndarray
    channel: ChannelState
    rngs: Dict[str, np.random.Generator]
    clock: SimClock
    sb_of_prb: np.ndarray
    buffers: List[UeBuffer]
    pf_central: PfState
    pf_local: List[PfState]
    csi_queue: Deque[CsiTable]
    samples: List[ThroughputSample] = field(default_factory=list)
    utilisation: Optional[Utilisation] = None
    trace: Optional[TraceBus] = None
    last_grid: Optional[ScheduleGrid] = None
    consumed_csi_tti: Optional[int] = None
    delivered_bits: float = 0.0

    @property
    def scheme(self) -> str:
        return self.config.run.scheme

    def own_users(self, trp_id: int) -> List[int]:
        return [u.id for u in self.ues if u.serving_trp == trp_id]


def build_world(config: RunConfig, seed: int, trace: Optional[TraceBus] = None) -> World:
    """Layout, user drop, CoMP sets and initial channel for one seed"""
    streams = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    rngs = {name: np.random.default_rng(s) for name, s in zip(_STREAMS, streams)}

    params = LayoutParams.from_config(config)
    trps = build_indoor_layout(params)
    sampler = LinkBudgetSampler.from_config(config)
    ues = drop_users(trps, config.run.users_per_trp, rngs["drop"], sampler, params,
                     max_attempts=config.deployment.max_drop_attempts)
    comp_sets = form_comp_sets(trps, config.effective_max_coord, ues)
    channel = ChannelState(ues, trps, config.channel.subbands, rngs["fading_init"], rho=config.channel.rho)

    n_ue = len(ues)
    pf_kwargs = {"horizon": config.pf.horizon, "floor": config.pf.floor_bps}
    world = World(
        config=config, seed=seed, trps=trps, ues=ues, comp_sets=comp_sets,
        trp_set=comp_set_of(comp_sets), channel=channel, rngs=rngs,
        clock=SimClock(0, config.carrier.tti_s, config.carrier.n_prb),
        sb_of_prb=subband_of_prb(config.carrier.n_prb, config.channel.subbands),
        buffers=[UeBuffer(u.id) for u in ues],
        pf_central=PfState(n_ue, **pf_kwargs),
        pf_local=[PfState(n_ue, **pf_kwargs) for _ in trps],
        csi_queue=deque(maxlen=config.phy.feedback_delay + 1),
        utilisation=Utilisation.empty(len(trps)),
        trace=trace,
    )
    logger.debug(f"Built world seed={seed}: {len(trps)} TRPs, {n_ue} UEs, {len(comp_sets)} CoMP sets")
    return world


def _tracing(world: World, event_type: str) -> bool:
    return world.trace is not None and world.trace.has_subscribers(event_type)


def measure(world: World) -> CsiTable:
    """Every UE measures CSI towards its in-set TRPs"""
    cfg = world.config
    ch = world.channel
    serving = np.array([u.serving_trp for u in world.ues], dtype=int)
    v = draw_hypothesis_precoders(world.rngs["csi"], ch.n_trp, ch.n_subbands, ch.n_tx)
    return measure_csi_table(
        ch.fading, ch.gain, serving, world.trp_set, v,
        prb_power=cfg.tx_power_w / cfg.carrier.n_prb, noise_power=cfg.noise_power_w,
        tti=world.clock.tti, se_cap=cfg.phy.se_cap, hypothesis=cfg.phy.csi_hypothesis,
        csi_error_var=cfg.channel.csi_error_var, error_rng=world.rngs["csi_error"],
    )


def schedule(world: World, table: CsiTable, active: List[int]) -> ScheduleGrid:
    """Run the configured scheme on the delayed CSI"""
    cfg = world.config
    tti, delay = world.clock.tti, cfg.phy.feedback_delay
    n_trp = len(world.trps)
    grid = ScheduleGrid(n_trp, cfg.carrier.n_prb, world.channel.n_tx)
    metric = cfg.pf.subband_metric

    if world.scheme in CENTRALIZED:
        scheduler = CENTRALIZED[world.scheme]
        for cs in world.comp_sets:
            view = SetCsiView(table, cs, tti, delay)
            part = scheduler(cs, view, world.pf_central, active, n_trp, world.sb_of_prb, metric)
            grid.merge_rows(part, cs.trp_ids)
    else:
        scheduler = DISTRIBUTED[world.scheme]
        active_set = set(active)
        for trp in world.trps:
            view = LocalCsiView(table, trp.id, tti, delay)
            if world.scheme == "none":
                users = [u for u in world.own_users(trp.id) if u in active_set]
            else:
                cs = world.comp_sets[world.trp_set[trp.id]]
                users = [u for u in cs.user_vector if u in active_set]
            part = scheduler(trp.id, view, world.pf_local[trp.id], users, n_trp, world.sb_of_prb, metric)
            grid.merge_rows(part, [trp.id])
    return grid


def prb_power(world: World, grid: ScheduleGrid) -> np.ndarray:
    """Per-PRB transmit power (W) of every TRP"""
    cfg = world.config
    n_prb = cfg.carrier.n_prb
    if cfg.phy.power_split == "all":
        return np.full(grid.n_trp, cfg.tx_power_w / n_prb)
    used = grid.transmitting().sum(axis=1)
    return cfg.tx_power_w / np.maximum(used, 1)


def step_tti(world: World) -> World:
    """Advance the world by one TTI"""
    cfg = world.config
    tti = world.clock.tti
    dt = world.clock.tti_duration
    n_ue, n_trp = len(world.ues), len(world.trps)

    # traffic
    lam = arrival_rate(cfg.traffic.lambda_per_s, cfg.traffic.scope, n_trp, n_ue)
    for f in spawn_arrivals(world.rngs["traffic"], tti, [u.id for u in world.ues], lam, dt, cfg.file_bits):
        world.buffers[f.ue_id].push(f)

    # (1) fading
    world.channel.evolve(world.rngs["fading"])
    if _tracing(world, TraceEventTypes.LINK):
        world.trace.publish(TraceEvent(TraceEventTypes.LINK, tti, world.channel.trace_rows(tti)))

    # (2) CSI measured now, consumable feedback_delay TTIs later
    world.csi_queue.append(measure(world))

    # (3) schedule on the report measured at tti - delay
    table = world.csi_queue[0]
    active = [b.ue_id for b in world.buffers if b.active]
    if table.measured_tti == tti - cfg.phy.feedback_delay and active:
        grid = schedule(world, table, active)
        world.consumed_csi_tti = table.measured_tti
    else:
        grid = ScheduleGrid(n_trp, cfg.carrier.n_prb, world.channel.n_tx)
    world.last_grid = grid
    if _tracing(world, TraceEventTypes.GRID):
        world.trace.publish(TraceEvent(TraceEventTypes.GRID, tti, grid.trace_rows(tti)))

    # (4) per-layer SINR and delivered bits
    layers = evaluate_grid(grid.users, grid.precoders, world.channel.fading, world.channel.gain,
                           prb_power(world, grid), cfg.noise_power_w, world.sb_of_prb, cfg.phy.se_cap)
    layer_bits = layers.se * cfg.prb_bandwidth_hz * dt
    wanted = np.bincount(layers.ue, weights=layer_bits, minlength=n_ue)
    backlog = np.array([b.backlog for b in world.buffers])
    delivered = np.minimum(wanted, backlog)
    share = np.divide(delivered, wanted, out=np.zeros(n_ue), where=wanted > 0)
    layer_delivered = layer_bits * share[layers.ue]

    for u in np.flatnonzero(delivered > 0):
        for f in world.buffers[u].deliver(float(delivered[u]), tti):
            if f.arrival_tti >= cfg.run.warmup_ttis:
                world.samples.append(ThroughputSample(
                    ue_id=f.ue_id, file_bits=float(f.size),
                    duration=(f.completion_tti - f.arrival_tti + 1) * dt,
                    arrival_tti=f.arrival_tti, completion_tti=f.completion_tti,
                ))
    world.delivered_bits += float(delivered.sum())

    if _tracing(world, TraceEventTypes.SINR):
        rows = [{"tti": tti, "ue": int(u), "trp": int(t), "prb": int(p), "sinr_db": float(10 * np.log10(max(s, 1e-30))),
                 "se": float(e)} for u, t, p, s, e in zip(layers.ue, layers.trp, layers.prb, layers.sinr, layers.se)]
        world.trace.publish(TraceEvent(TraceEventTypes.SINR, tti, rows))

    # (5) PF updates: network-wide for centralized schemes, per TRP otherwise
    if world.scheme in CENTRALIZED:
        pf_update(world.pf_central, delivered, tti, dt)
    else:
        per_trp = np.zeros((n_trp, n_ue))
        np.add.at(per_trp, (layers.trp, layers.ue), layer_delivered)
        for t in range(n_trp):
            pf_update(world.pf_local[t], per_trp[t], tti, dt)

    _account(world, grid, layers)
    world.clock.advance()
    return world


def _account(world: World, grid: ScheduleGrid, layers) -> None:
    util = world.utilisation
    util.transmitting += (grid.users >= 0).sum(axis=1)
    util.blank += (grid.users == BLANK).sum(axis=1)
    util.idle += (grid.users == IDLE).sum(axis=1)
    util.layers += len(layers.ue)
    util.se_sum += float(layers.se.sum())
    util.scheduled_prb_ue += len(set(zip(layers.ue.tolist(), layers.prb.tolist())))


@dataclass(frozen=True)
class RunResult:
    scheme: str
    seed: int
    samples: List[ThroughputSample]
    utilisation: Utilisation
    digest: str
    delivered_bits: float
    n_ue: int


def run_simulation(config: RunConfig, seed: int, trace: Optional[TraceBus] = None) -> RunResult:
    """Run config.run.ttis TTIs of one seed"""
    world = build_world(config, seed, trace)
    logger.info(f"Running scheme={config.run.scheme} seed={seed} ttis={config.run.ttis} "
                f"users/TRP={config.run.users_per_trp} max_coord={config.effective_max_coord}")
    for _ in range(config.run.ttis):
        step_tti(world)
        if world.clock.tti % 1000 == 0:
            logger.debug(f"seed={seed} tti={world.clock.tti} samples={len(world.samples)}")
    digest = sample_digest(world.samples)
    logger.info(f"Finished scheme={config.run.scheme} seed={seed}: {len(world.samples)} files completed")
    return RunResult(scheme=config.run.scheme, seed=seed, samples=world.samples,
                     utilisation=world.utilisation, digest=digest,
                     delivered_bits=world.delivered_bits, n_ue=len(world.ues))
