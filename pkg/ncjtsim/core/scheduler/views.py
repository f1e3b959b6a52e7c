"""
CSI access views

A centralized scheduler sees every report of its CoMP set; a
distributed scheduler sees only the reports its own TRP received.
Reading outside that scope raises CsiAccessError.
"""

from typing import Sequence

import numpy as np

from ncjtsim.core.exceptions import CsiAccessError
from ncjtsim.core.phy import CsiTable
from ncjtsim.core.topology import CompSet


def _check_age(table: CsiTable, tti: int, feedback_delay: int) -> None:
    if table.measured_tti > tti - feedback_delay:
        raise CsiAccessError(
            f"report measured at TTI {table.measured_tti} is younger than the "
            f"{feedback_delay}-TTI feedback delay at TTI {tti}"
        )


class SetCsiView:
    """Set-wide CSI: every (user, in-set TRP) report of one CoMP set"""

    def __init__(self, table: CsiTable, comp_set: CompSet, tti: int, feedback_delay: int):
        _check_age(table, tti, feedback_delay)
        self.__table = table
        self.comp_set = comp_set
        self.measured_tti = table.measured_tti
        self.n_tx = table.precoders.shape[-1]

    def _trp_column(self, trp_id: int) -> int:
        if trp_id not in self.comp_set:
            raise CsiAccessError(f"TRP {trp_id} is outside CoMP set {self.comp_set.id}", trp_id=trp_id)
        return trp_id

    def se_matrix(self, users: Sequence[int]) -> np.ndarray:
        """Wideband c of users x in-set TRPs, columns in set order"""
        return self.__table.se[np.ix_(list(users), list(self.comp_set.trp_ids))]

    def subband_se_matrix(self, users: Sequence[int]) -> np.ndarray:
        """(users, in-set TRPs, subbands)"""
        return self.__table.subband_se[np.ix_(list(users), list(self.comp_set.trp_ids))]

    def precoder(self, ue_id: int, trp_id: int, subband: int) -> np.ndarray:
        return self.__table.precoders[ue_id, self._trp_column(trp_id), subband]


class LocalCsiView:
    """Single-TRP CSI: the reports received by one TRP only"""

    def __init__(self, table: CsiTable, trp_id: int, tti: int, feedback_delay: int):
        _check_age(table, tti, feedback_delay)
        self.__table = table
        self.trp_id = trp_id
        self.measured_tti = table.measured_tti
        self.n_tx = table.precoders.shape[-1]

    def _own(self, trp_id: int) -> None:
        if trp_id != self.trp_id:
            raise CsiAccessError(
                f"local scheduler of TRP {self.trp_id} cannot read CSI sent to TRP {trp_id}",
                trp_id=trp_id,
            )

    def se(self, ue_id: int, trp_id: int) -> float:
        self._own(trp_id)
        return float(self.__table.se[ue_id, trp_id])

    def se_vector(self, users: Sequence[int]) -> np.ndarray:
        return self.__table.se[list(users), self.trp_id]

    def subband_se_vector(self, users: Sequence[int]) -> np.ndarray:
        """(users, subbands)"""
        return self.__table.subband_se[list(users), self.trp_id]

    def precoder(self, ue_id: int, trp_id: int, subband: int) -> np.ndarray:
        self._own(trp_id)
        return self.__table.precoders[ue_id, trp_id, subband]
