"""Throughput samples, percentiles and CDF rows"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ncjtsim.core.shared.utils import generate_hash

logger = logging.getLogger("ncjtsim.stats")


@dataclass(frozen=True)
class ThroughputSample:
    ue_id: int
    file_bits: float
    duration: float  # s
    arrival_tti: int = 0
    completion_tti: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("sample duration must be positive")

    @property
    def throughput(self) -> float:
        return self.file_bits / self.duration

    def as_row(self) -> dict:
        return {"ue_id": self.ue_id, "file_bits": self.file_bits, "duration_s": self.duration,
                "throughput_bps": self.throughput}


@dataclass(frozen=True)
class Percentiles:
    p5: Optional[float]
    p50: Optional[float]
    p95: Optional[float]
    count: int = 0

    @property
    def absent(self) -> bool:
        return self.count == 0


def pool(*sample_lists: Iterable[ThroughputSample]) -> List[ThroughputSample]:
    """Merge per-seed sample lists"""
    pooled: List[ThroughputSample] = []
    for samples in sample_lists:
        pooled.extend(samples)
    return pooled


def collect_percentiles(samples: Sequence[ThroughputSample]) -> Percentiles:
    """5th/50th/95th percentile per-file throughput, linear interpolation"""
    if not samples:
        logger.warning("No throughput samples; percentiles reported as absent")
        return Percentiles(None, None, None, 0)
    thr = np.array([s.throughput for s in samples], dtype=float)
    p5, p50, p95 = np.percentile(thr, [5, 50, 95])
    return Percentiles(float(p5), float(p50), float(p95), len(samples))


def cdf_rows(samples: Sequence[ThroughputSample]) -> List[dict]:
    """Sorted throughput against empirical probability"""
    thr = np.sort(np.array([s.throughput for s in samples], dtype=float))
    n = thr.size
    return [{"throughput_bps": float(x), "probability": (i + 1) / n} for i, x in enumerate(thr)]


def sample_digest(samples: Sequence[ThroughputSample]) -> str:
    """SHA-256 of the exact sample stream"""
    text = "\n".join(
        f"{s.ue_id},{s.file_bits!r},{s.duration!r},{s.arrival_tti},{s.completion_tti}" for s in samples
    )
    return generate_hash(text)
