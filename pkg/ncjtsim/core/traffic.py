"""FTP traffic: Poisson file arrivals and per-UE FIFO download queues"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence

import numpy as np

logger = logging.getLogger("ncjtsim.traffic")

FILE_BITS = 8 * 500_000


@dataclass
class TrafficFile:
    ue_id: int
    size: int = FILE_BITS  # bits
    arrival_tti: int = 0
    remaining_bits: float = None
    completion_tti: Optional[int] = None

    def __post_init__(self):
        if self.remaining_bits is None:
            self.remaining_bits = float(self.size)

    @property
    def done(self) -> bool:
        return self.completion_tti is not None


def arrival_rate(lam: float, scope: str, n_trp: int, n_ue: int) -> float:
    """Network-wide arrival rate (files/s) for a rate given per network, TRP or UE"""
    if scope == "network":
        return lam
    if scope == "trp":
        return lam * n_trp
    if scope == "ue":
        return lam * n_ue
    raise ValueError(f"unknown arrival scope {scope!r}")


def spawn_arrivals(rng: np.random.Generator, tti: int, ues: Sequence[int], lam: float,
                   tti_duration: float = 1e-3, file_bits: int = FILE_BITS) -> List[TrafficFile]:
    """Poisson arrivals at aggregate rate lam (files/s), each to a uniformly random UE"""
    if lam < 0:
        raise ValueError("arrival rate must be non-negative")
    count = rng.poisson(lam * tti_duration)
    if count == 0 or len(ues) == 0:
        return []
    owners = rng.integers(0, len(ues), size=count)
    return [TrafficFile(ue_id=int(ues[i]), size=file_bits, arrival_tti=tti) for i in owners]


class UeBuffer:
    """Files of one UE, downloaded in arrival order"""

    def __init__(self, ue_id: int):
        self.ue_id = ue_id
        self._files: Deque[TrafficFile] = deque()

    def push(self, f: TrafficFile) -> None:
        self._files.append(f)

    @property
    def backlog(self) -> float:
        return sum(f.remaining_bits for f in self._files)

    @property
    def active(self) -> bool:
        return bool(self._files)

    def __len__(self) -> int:
        return len(self._files)

    def __iter__(self):
        return iter(self._files)

    def deliver(self, bits: float, tti: int) -> List[TrafficFile]:
        """Serve up to `bits` FIFO; returns files completed in this TTI"""
        completed = []
        while bits > 0 and self._files:
            head = self._files[0]
            served = min(bits, head.remaining_bits)
            head.remaining_bits -= served
            bits -= served
            if head.remaining_bits <= 0:
                head.remaining_bits = 0.0
                head.completion_tti = tti
                completed.append(self._files.popleft())
        return completed
