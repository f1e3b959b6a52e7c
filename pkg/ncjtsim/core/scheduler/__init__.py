"""
Coordination schedulers

Proportional-fair core plus the DPS and F-NCJT centralized schedulers
and the NF-NCJT and no-coordination distributed schedulers.
"""

from dataclasses import dataclass

from .centralized import schedule_dps, schedule_fncjt
from .distributed import schedule_baseline, schedule_nfncjt
from .pf import PfState, pf_metric, pf_select, pf_update
from .views import LocalCsiView, SetCsiView


@dataclass(frozen=True)
class SchemeProperties:
    """Information exchange a scheme needs between coordinated TRPs"""
    centralized: bool
    joint_precoder: bool
    fully_overlapped: bool
    user_data_sharing: bool
    csi_sharing: bool


SCHEME_PROPERTIES = {
    "none": SchemeProperties(False, False, False, False, False),
    "dps": SchemeProperties(True, False, False, True, True),
    "fncjt": SchemeProperties(True, False, True, False, True),
    "nfncjt": SchemeProperties(False, False, False, False, False),
}

CENTRALIZED = {"dps": schedule_dps, "fncjt": schedule_fncjt}
DISTRIBUTED = {"nfncjt": schedule_nfncjt, "none": schedule_baseline}

__all__ = [
    "PfState", "pf_metric", "pf_select", "pf_update",
    "SetCsiView", "LocalCsiView",
    "schedule_dps", "schedule_fncjt", "schedule_nfncjt", "schedule_baseline",
    "SchemeProperties", "SCHEME_PROPERTIES", "CENTRALIZED", "DISTRIBUTED",
]
