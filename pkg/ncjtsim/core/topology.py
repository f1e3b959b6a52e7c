"""
Indoor deployment: TRP layout, user drop, serving-TRP attachment and
disjoint CoMP-set formation.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from ncjtsim.core.exceptions import ConfigurationError, SimulationSetupError

logger = logging.getLogger("ncjtsim.topology")


@dataclass(frozen=True)
class Trp:
    id: int
    position: Tuple[float, float, float]
    tx_power: float = 24.0  # dBm
    n_tx: int = 2
    antenna_gain: float = 5.0  # dBi

    def __post_init__(self):
        if not np.isfinite(self.tx_power):
            raise ConfigurationError("TRP transmit power must be finite", key="tx_power", value=self.tx_power)
        if self.n_tx < 1:
            raise ConfigurationError("TRP needs at least one antenna", key="n_tx", value=self.n_tx, allowed=">= 1")


@dataclass(frozen=True)
class Ue:
    id: int
    position: Tuple[float, float, float]
    n_rx: int = 4
    serving_trp: int = -1
    # large-scale link parameters drawn when the user was dropped
    links: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CompSet:
    id: int
    trp_ids: Tuple[int, ...]
    user_vector: Tuple[int, ...] = ()

    def __contains__(self, trp_id: int) -> bool:
        return trp_id in self.trp_ids

    @property
    def size(self) -> int:
        return len(self.trp_ids)


@dataclass(frozen=True)
class LayoutParams:
    trp_count: int = 8
    isd: float = 30.0
    rows: int = 2
    row_spacing: float = 20.0
    hall_length: float = 120.0
    hall_width: float = 50.0
    trp_height: float = 6.0
    ue_height: float = 1.5
    tx_power: float = 24.0
    n_tx: int = 2
    n_rx: int = 4
    antenna_gain: float = 5.0

    @classmethod
    def from_config(cls, config) -> "LayoutParams":
        dep = config.deployment
        return cls(
            trp_count=dep.trp_count, isd=dep.isd, rows=dep.rows, row_spacing=dep.row_spacing,
            hall_length=dep.hall_length, hall_width=dep.hall_width, trp_height=dep.trp_height,
            ue_height=dep.ue_height, tx_power=dep.tx_power_dbm, n_tx=dep.n_tx, n_rx=dep.n_rx,
            antenna_gain=dep.trp_antenna_gain_dbi,
        )


class LargeScaleSampler(Protocol):
    """Draws per-TRP coupling gains for a candidate user position"""

    def __call__(self, position: np.ndarray, trps: Sequence[Trp],
                 rng: np.random.Generator) -> Tuple[np.ndarray, Any]:
        ...


def build_indoor_layout(params: LayoutParams) -> List[Trp]:
    """Place TRPs on a rows x cols grid centred in the hall.

    With the defaults this gives x in {15, 45, 75, 105} and y in {15, 35}.
    TRP ids run row by row.
    """
    count = params.trp_count
    if count < 1:
        raise ConfigurationError("TRP count must be positive", key="trp_count", value=count, allowed=">= 1")

    centre_x, centre_y = params.hall_length / 2, params.hall_width / 2
    if count == 1:
        positions = [(centre_x, centre_y)]
    else:
        if count % params.rows != 0:
            raise ConfigurationError(
                "TRP count not expressible as the configured grid",
                key="trp_count", value=count, allowed=f"1 or a multiple of rows={params.rows}",
            )
        cols = count // params.rows
        positions = [
            (centre_x + params.isd * (c - (cols - 1) / 2),
             centre_y + params.row_spacing * (r - (params.rows - 1) / 2))
            for r in range(params.rows)
            for c in range(cols)
        ]

    for x, y in positions:
        if not (0 <= x <= params.hall_length and 0 <= y <= params.hall_width):
            raise ConfigurationError(
                "TRP grid does not fit inside the hall",
                key="isd", value=params.isd,
                allowed=f"grid within {params.hall_length} m x {params.hall_width} m",
            )

    trps = [
        Trp(id=i, position=(float(x), float(y), params.trp_height), tx_power=params.tx_power,
            n_tx=params.n_tx, antenna_gain=params.antenna_gain)
        for i, (x, y) in enumerate(positions)
    ]
    logger.debug(f"Built layout with {len(trps)} TRPs")
    return trps


def attach_users(ues: Sequence[Ue], trps: Sequence[Trp], coupling_gains: np.ndarray) -> np.ndarray:
    """Serving TRP per UE: maximum coupling gain, ties to the lowest TRP id.

    coupling_gains has shape (n_ue, n_trp), columns ordered as trps.
    Returns the serving TRP id of each UE.
    """
    gains = np.atleast_2d(np.asarray(coupling_gains, dtype=float))
    if gains.shape != (len(ues), len(trps)):
        raise ValueError(f"coupling gains shape {gains.shape} does not match "
                         f"{len(ues)} UEs x {len(trps)} TRPs")
    trp_ids = np.array([t.id for t in trps])
    order = np.argsort(trp_ids, kind="stable")
    # argmax returns the first maximum, so sort columns by TRP id first
    best = order[np.argmax(gains[:, order], axis=1)]
    return trp_ids[best]


def drop_users(trps: Sequence[Trp], n_per_trp: int, rng: np.random.Generator,
               sampler: LargeScaleSampler, params: Optional[LayoutParams] = None,
               max_attempts: int = 100000) -> List[Ue]:
    """Uniform drop with exactly n_per_trp users attached to every TRP.

    Candidates are drawn one at a time; a candidate whose best TRP is already
    full is rejected and re-dropped.
    """
    if n_per_trp < 1:
        raise ConfigurationError("users per TRP must be positive", key="users_per_trp",
                                 value=n_per_trp, allowed=">= 1")
    params = params or LayoutParams(trp_count=len(trps))
    target = n_per_trp * len(trps)
    load = {t.id: 0 for t in trps}
    ues: List[Ue] = []
    attempts = 0

    while len(ues) < target:
        if attempts >= max_attempts:
            raise SimulationSetupError(
                f"could not attach {n_per_trp} users to every TRP after {attempts} drops "
                f"(attached {len(ues)}/{target})",
                component="topology",
            )
        attempts += 1
        position = np.array([
            rng.uniform(0.0, params.hall_length),
            rng.uniform(0.0, params.hall_width),
            params.ue_height,
        ])
        gains, links = sampler(position, trps, rng)
        serving = int(attach_users([None], trps, gains[np.newaxis, :])[0])
        if load[serving] >= n_per_trp:
            continue
        load[serving] += 1
        ues.append(Ue(id=len(ues), position=tuple(float(v) for v in position), n_rx=params.n_rx,
                      serving_trp=serving, links=links))

    logger.debug(f"Dropped {len(ues)} users in {attempts} attempts")
    return ues


def form_comp_sets(trps: Sequence[Trp], max_coord: int, ues: Sequence[Ue] = ()) -> List[CompSet]:
    """Greedy nearest-neighbour partition into disjoint sets of size <= max_coord.

    The lowest-id unassigned TRP seeds each set and pulls in its nearest
    unassigned TRPs (distance ties to the lowest id).
    """
    if not 1 <= max_coord <= len(trps):
        raise ConfigurationError("maximum coordinated TRPs out of range", key="max_coord",
                                 value=max_coord, allowed=f"1..{len(trps)}")
    by_id = {t.id: t for t in trps}
    unassigned = sorted(by_id)
    sets: List[CompSet] = []

    while unassigned:
        seed = unassigned.pop(0)
        seed_pos = np.array(by_id[seed].position)
        ranked = sorted(
            unassigned,
            key=lambda tid: (float(np.linalg.norm(np.array(by_id[tid].position) - seed_pos)), tid),
        )
        members = (seed, *ranked[:max_coord - 1])
        for tid in members[1:]:
            unassigned.remove(tid)
        users = tuple(sorted(u.id for u in ues if u.serving_trp in members))
        sets.append(CompSet(id=len(sets), trp_ids=members, user_vector=users))

    return sets


def comp_set_of(comp_sets: Sequence[CompSet]) -> np.ndarray:
    """Array mapping TRP id -> CoMP-set id"""
    n = sum(s.size for s in comp_sets)
    owner = np.full(n, -1, dtype=int)
    for s in comp_sets:
        owner[list(s.trp_ids)] = s.id
    return owner


def dump_layout_rows(trps: Sequence[Trp], comp_sets: Sequence[CompSet] = ()) -> List[dict]:
    """Rows for layout.csv (trp_id, x, y, z, comp_set)"""
    owner = {tid: s.id for s in comp_sets for tid in s.trp_ids}
    return [
        {"trp_id": t.id, "x": t.position[0], "y": t.position[1], "z": t.position[2],
         "comp_set": owner.get(t.id, -1)}
        for t in trps
    ]
