"""
Distributed schedulers: one independent pass per TRP.

Each local scheduler reads only the CSI sent to its own TRP and keeps its
own PF state built from the bits it delivered itself.
"""

import logging
from typing import Iterable

import numpy as np

from ncjtsim.core.grid import ScheduleGrid
from ncjtsim.core.scheduler.pf import PfState, pf_select
from ncjtsim.core.scheduler.views import LocalCsiView

logger = logging.getLogger("ncjtsim.scheduler.distributed")


def _schedule_local(trp_id: int, csi: LocalCsiView, pf_local: PfState, users: Iterable[int],
                    n_trp: int, sb_of_prb: np.ndarray, subband_metric: bool) -> ScheduleGrid:
    n_prb = len(sb_of_prb)
    grid = ScheduleGrid(n_trp, n_prb, csi.n_tx)
    users = sorted(set(users))
    if not users:
        return grid

    if subband_metric:
        c = csi.subband_se_vector(users)[:, sb_of_prb]
    else:
        c = csi.se_vector(users)
    winners = pf_select(c, pf_local.avg[users], users, n_prb)
    for p, ue in enumerate(winners):
        grid.assign(trp_id, p, int(ue), csi.precoder(int(ue), trp_id, sb_of_prb[p]))
    return grid


def schedule_nfncjt(trp_id: int, csi_local: LocalCsiView, pf_local: PfState, active_users_in_set: Iterable[int],
                    n_trp: int, sb_of_prb: np.ndarray, subband_metric: bool = False) -> ScheduleGrid:
    """Non-fully overlapped NCJT: local PF over the CoMP set's user vector
    using c_{j,b} of this TRP only. Overlap with other TRPs is coincidental."""
    return _schedule_local(trp_id, csi_local, pf_local, active_users_in_set, n_trp, sb_of_prb, subband_metric)


def schedule_baseline(trp_id: int, csi_local: LocalCsiView, pf_local: PfState, own_users: Iterable[int],
                      n_trp: int, sb_of_prb: np.ndarray, subband_metric: bool = False) -> ScheduleGrid:
    """No coordination: local PF over the TRP's own attached users"""
    return _schedule_local(trp_id, csi_local, pf_local, own_users, n_trp, sb_of_prb, subband_metric)
