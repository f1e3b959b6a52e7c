"""Proportional-fair core shared by every coordination scheme"""

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

logger = logging.getLogger("ncjtsim.scheduler.pf")

PF_FLOOR_BPS = 1.0


@dataclass
class PfState:
    """Exponentially smoothed per-UE throughput (bps) with a positive floor"""
    n_ue: int
    horizon: float = 100.0
    floor: float = PF_FLOOR_BPS
    avg: np.ndarray = field(default=None)
    last_tti: int = -1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("PF horizon must be at least one TTI")
        if self.floor <= 0:
            raise ValueError("PF floor must be positive")
        if self.avg is None:
            self.avg = np.full(self.n_ue, self.floor, dtype=float)

    def copy(self) -> "PfState":
        return PfState(self.n_ue, self.horizon, self.floor, self.avg.copy(), self.last_tti)


def pf_metric(inst_se, avg_thr):
    """score = instantaneous SE / smoothed throughput"""
    return np.asarray(inst_se, dtype=float) / np.asarray(avg_thr, dtype=float)


def pf_select(inst_se: np.ndarray, avg_thr: Sequence[float], ue_ids: Sequence[int], n_prb: int) -> np.ndarray:
    """PF winner per PRB.

    inst_se is (n_candidates,) for a wideband metric or (n_candidates, n_prb)
    per PRB. Ties go to the lowest UE id on PRB 0 and cycle through the tied
    UEs (ordered by id) on later PRBs.
    """
    ue_ids = np.asarray(ue_ids, dtype=int)
    if ue_ids.size == 0:
        raise ValueError("no candidate users")
    order = np.argsort(ue_ids, kind="stable")
    ids = ue_ids[order]
    se = np.asarray(inst_se, dtype=float)
    if se.ndim == 1:
        se = np.broadcast_to(se[:, None], (se.size, n_prb))
    scores = pf_metric(se[order], np.asarray(avg_thr, dtype=float)[order][:, None])

    tied = scores == scores.max(axis=0, keepdims=True)
    n_tied = tied.sum(axis=0)
    pick = np.arange(n_prb) % n_tied
    rank = np.cumsum(tied, axis=0) - 1
    chosen = np.argmax(tied & (rank == pick[None, :]), axis=0)
    return ids[chosen]


def pf_update(state: PfState, served_bits: Union[np.ndarray, Mapping[int, float]], tti: int,
              tti_duration: float = 1e-3) -> PfState:
    """avg <- (1 - 1/tau) avg + (1/tau) rate, applied once per TTI to every UE.

    UEs missing from a served_bits mapping count as unserved.
    """
    if tti <= state.last_tti:
        raise ValueError(f"PF state already updated at TTI {state.last_tti}")
    if isinstance(served_bits, Mapping):
        bits = np.zeros(state.n_ue)
        for ue, b in served_bits.items():
            bits[ue] = b
    else:
        bits = np.asarray(served_bits, dtype=float)
    alpha = 1.0 / state.horizon
    state.avg = np.maximum((1.0 - alpha) * state.avg + alpha * bits / tti_duration, state.floor)
    state.last_tti = tti
    return state
