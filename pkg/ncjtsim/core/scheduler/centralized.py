"""
Centralized schedulers: one pass per CoMP set per TTI.

Both read set-wide CSI. DPS places each PRB winner on its best TRP
and blanks the rest of the set; F-NCJT gives the winner the PRB on every
in-set TRP.
"""

import logging
from typing import Iterable

import numpy as np

from ncjtsim.core.grid import ScheduleGrid
from ncjtsim.core.scheduler.pf import PfState, pf_select
from ncjtsim.core.scheduler.views import SetCsiView
from ncjtsim.core.topology import CompSet

logger = logging.getLogger("ncjtsim.scheduler.centralized")


def _set_users(comp_set: CompSet, active_users: Iterable[int]) -> list:
    # union of the members' user vectors, recomputed every TTI
    members = set(comp_set.user_vector)
    return sorted(u for u in set(active_users) if u in members)


def _per_prb_se(csi: SetCsiView, users: list, sb_of_prb: np.ndarray, subband_metric: bool) -> np.ndarray:
    """c per (user, in-set TRP, PRB)"""
    if subband_metric:
        return csi.subband_se_matrix(users)[:, :, sb_of_prb]
    c = csi.se_matrix(users)
    return np.repeat(c[:, :, None], len(sb_of_prb), axis=2)


def schedule_dps(comp_set: CompSet, csi: SetCsiView, pf: PfState, active_users: Iterable[int],
                 n_trp: int, sb_of_prb: np.ndarray, subband_metric: bool = False) -> ScheduleGrid:
    """Dynamic point selection with blanking of the other in-set TRPs.

    eta_j = max over in-set TRPs of c_{j,b}; the winner goes to its best TRP
    (first in set order on ties) and the other in-set TRPs are BLANK.
    """
    n_prb = len(sb_of_prb)
    grid = ScheduleGrid(n_trp, n_prb, csi.n_tx)
    users = _set_users(comp_set, active_users)
    if not users:
        return grid

    c = _per_prb_se(csi, users, sb_of_prb, subband_metric)  # (U, K, P)
    eta = c.max(axis=1)
    best = c.argmax(axis=1)  # first maximum follows set order
    winners = pf_select(eta, pf.avg[users], users, n_prb)
    row_of = {u: i for i, u in enumerate(users)}

    for p, ue in enumerate(winners):
        serving = comp_set.trp_ids[best[row_of[ue], p]]
        for trp_id in comp_set.trp_ids:
            if trp_id == serving:
                grid.assign(trp_id, p, int(ue), csi.precoder(int(ue), trp_id, sb_of_prb[p]))
            else:
                grid.blank(trp_id, p)
    return grid


def schedule_fncjt(comp_set: CompSet, csi: SetCsiView, pf: PfState, active_users: Iterable[int],
                   n_trp: int, sb_of_prb: np.ndarray, subband_metric: bool = False) -> ScheduleGrid:
    """Fully overlapped NCJT: eta_j = sum of c_{j,b} over the set; the winner
    takes the PRB on every in-set TRP, one layer per TRP."""
    n_prb = len(sb_of_prb)
    grid = ScheduleGrid(n_trp, n_prb, csi.n_tx)
    users = _set_users(comp_set, active_users)
    if not users:
        return grid

    eta = _per_prb_se(csi, users, sb_of_prb, subband_metric).sum(axis=1)
    winners = pf_select(eta, pf.avg[users], users, n_prb)

    for p, ue in enumerate(winners):
        for trp_id in comp_set.trp_ids:
            grid.assign(trp_id, p, int(ue), csi.precoder(int(ue), trp_id, sb_of_prb[p]))
    return grid
