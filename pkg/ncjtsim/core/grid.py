"""Per-TRP, per-PRB allocation grid shared by schedulers and the PHY"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

IDLE = -1
BLANK = -2


@dataclass(frozen=True)
class GridEntry:
    """One TRP on one PRB: a user with its precoder, BLANK or IDLE"""
    user: int
    precoder: Optional[np.ndarray] = None

    @property
    def is_transmitting(self) -> bool:
        return self.user >= 0


class ScheduleGrid:
    """users[t, p] is a UE id, IDLE or BLANK; precoders[t, p] the layer's precoder.

    Rows are indexed by TRP id.
    """

    def __init__(self, n_trp: int, n_prb: int, n_tx: int):
        self.users = np.full((n_trp, n_prb), IDLE, dtype=int)
        self.precoders = np.zeros((n_trp, n_prb, n_tx), dtype=complex)

    @property
    def n_trp(self) -> int:
        return self.users.shape[0]

    @property
    def n_prb(self) -> int:
        return self.users.shape[1]

    def assign(self, trp_id: int, prb: int, user: int, precoder: np.ndarray) -> None:
        self.users[trp_id, prb] = user
        self.precoders[trp_id, prb] = precoder

    def blank(self, trp_id: int, prb: int) -> None:
        self.users[trp_id, prb] = BLANK
        self.precoders[trp_id, prb] = 0.0

    def merge_rows(self, other: "ScheduleGrid", trp_ids: Sequence[int]) -> None:
        """Copy the rows of trp_ids from a partial grid"""
        rows = list(trp_ids)
        self.users[rows] = other.users[rows]
        self.precoders[rows] = other.precoders[rows]

    def row(self, prb: int) -> List[GridEntry]:
        """Allocation of every TRP on one PRB"""
        return [
            GridEntry(int(self.users[t, prb]),
                      self.precoders[t, prb].copy() if self.users[t, prb] >= 0 else None)
            for t in range(self.n_trp)
        ]

    def transmitting(self) -> np.ndarray:
        return self.users >= 0

    def copy(self) -> "ScheduleGrid":
        dup = ScheduleGrid(self.n_trp, self.n_prb, self.precoders.shape[-1])
        dup.users[...] = self.users
        dup.precoders[...] = self.precoders
        return dup

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScheduleGrid):
            return NotImplemented
        return (np.array_equal(self.users, other.users)
                and np.array_equal(self.precoders, other.precoders))

    def trace_rows(self, tti: int) -> List[dict]:
        labels = {IDLE: "IDLE", BLANK: "BLANK"}
        return [
            {"tti": tti, "trp": t, "prb": p,
             "entry": labels.get(int(self.users[t, p]), str(int(self.users[t, p])))}
            for t in range(self.n_trp)
            for p in range(self.n_prb)
        ]
