"""
Indoor-hotspot propagation and fast fading.

Large-scale parameters (LOS state, pathloss, shadowing) are drawn once per
link when users are dropped. Fast fading is spatially white Rayleigh per
subband with first-order autoregressive time correlation.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from ncjtsim.core.topology import Trp, Ue

logger = logging.getLogger("ncjtsim.channel")

LOS_RADIUS_M = 18.0
LOS_DECAY_M = 27.0
LOS_FLOOR_DISTANCE_M = 37.0
LOS_FLOOR = 0.5


def pathloss_db(distance_3d, fc: float, is_los):
    """Indoor-hotspot pathloss in dB; distances below 1 m are clamped to 1 m"""
    d = np.maximum(np.asarray(distance_3d, dtype=float), 1.0)
    los = 16.9 * np.log10(d) + 32.8 + 20 * math.log10(fc)
    nlos = 43.3 * np.log10(d) + 11.5 + 20 * math.log10(fc)
    result = np.where(is_los, los, nlos)
    return float(result) if result.ndim == 0 else result


def los_probability(distance_2d):
    d = np.asarray(distance_2d, dtype=float)
    p = np.where(
        d <= LOS_RADIUS_M,
        1.0,
        np.where(d < LOS_FLOOR_DISTANCE_M, np.exp(-(d - LOS_RADIUS_M) / LOS_DECAY_M), LOS_FLOOR),
    )
    return float(p) if p.ndim == 0 else p


def draw_shadowing(is_los, rng: np.random.Generator, sigma_los: float = 3.0, sigma_nlos: float = 4.0):
    """Zero-mean lognormal shadowing in dB"""
    sigma = np.where(is_los, sigma_los, sigma_nlos)
    value = rng.normal(0.0, 1.0, size=np.shape(sigma)) * sigma
    return float(value) if np.ndim(value) == 0 else value


def rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) entries"""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass(frozen=True)
class LinkState:
    ue_id: int
    trp_id: int
    is_los: bool
    pathloss: float  # dB
    shadowing: float  # dB
    fading: np.ndarray  # (subbands, n_rx, n_tx), unit average element power


def ar1_step(fading: np.ndarray, rng: np.random.Generator, rho: float) -> np.ndarray:
    """fading <- rho * fading + sqrt(1 - rho^2) * innovation; rho >= 1 freezes it"""
    if rho >= 1.0:
        return fading
    innovation = rayleigh(rng, fading.shape)
    return rho * fading + math.sqrt(1.0 - rho * rho) * innovation


def evolve_fading(link: LinkState, rng: np.random.Generator, rho: float = 0.99) -> LinkState:
    if rho >= 1.0:
        return link
    return replace(link, fading=ar1_step(link.fading, rng, rho))


def coupling_gain_db(link: LinkState, trp: Trp, ue_antenna_gain: float = 0.0) -> float:
    return -link.pathloss - link.shadowing + trp.antenna_gain + ue_antenna_gain


@dataclass(frozen=True)
class LargeScaleLinks:
    """Per-TRP large-scale parameters of one dropped user"""
    is_los: np.ndarray
    pathloss_db: np.ndarray
    shadowing_db: np.ndarray
    coupling_gain_db: np.ndarray


class LinkBudgetSampler:
    """Draws LOS state, pathloss and shadowing of a candidate user towards every TRP"""

    def __init__(self, fc_ghz: float = 3.5, sigma_los: float = 3.0, sigma_nlos: float = 4.0,
                 ue_antenna_gain: float = 0.0):
        self.fc_ghz = fc_ghz
        self.sigma_los = sigma_los
        self.sigma_nlos = sigma_nlos
        self.ue_antenna_gain = ue_antenna_gain

    @classmethod
    def from_config(cls, config) -> "LinkBudgetSampler":
        return cls(fc_ghz=config.carrier.fc_ghz, sigma_los=config.channel.shadowing_los_db,
                   sigma_nlos=config.channel.shadowing_nlos_db,
                   ue_antenna_gain=config.deployment.ue_antenna_gain_dbi)

    def __call__(self, position: np.ndarray, trps: Sequence[Trp],
                 rng: np.random.Generator) -> Tuple[np.ndarray, LargeScaleLinks]:
        trp_pos = np.array([t.position for t in trps], dtype=float)
        delta = trp_pos - np.asarray(position, dtype=float)
        d2 = np.hypot(delta[:, 0], delta[:, 1])
        d3 = np.linalg.norm(delta, axis=1)
        is_los = rng.random(len(trps)) < los_probability(d2)
        pl = pathloss_db(d3, self.fc_ghz, is_los)
        sh = draw_shadowing(is_los, rng, self.sigma_los, self.sigma_nlos)
        antenna = np.array([t.antenna_gain for t in trps], dtype=float)
        gain = -pl - sh + antenna + self.ue_antenna_gain
        return gain, LargeScaleLinks(is_los=is_los, pathloss_db=pl, shadowing_db=sh, coupling_gain_db=gain)


class ChannelState:
    """All (UE, TRP) links of one run, stored as stacked arrays.

    fading has shape (n_ue, n_trp, n_subbands, n_rx, n_tx).
    """

    def __init__(self, ues: Sequence[Ue], trps: Sequence[Trp], n_subbands: int,
                 rng: np.random.Generator, rho: float = 0.99):
        n_rx = {u.n_rx for u in ues}
        n_tx = {t.n_tx for t in trps}
        if len(n_rx) > 1 or len(n_tx) > 1:
            raise ValueError("all UEs and all TRPs must share antenna counts")
        self.n_ue, self.n_trp = len(ues), len(trps)
        self.n_subbands = n_subbands
        self.n_rx, self.n_tx = n_rx.pop(), n_tx.pop()
        self.rho = rho

        self.is_los = np.array([u.links.is_los for u in ues], dtype=bool)
        self.pathloss_db = np.array([u.links.pathloss_db for u in ues], dtype=float)
        self.shadowing_db = np.array([u.links.shadowing_db for u in ues], dtype=float)
        self.gain_db = np.array([u.links.coupling_gain_db for u in ues], dtype=float)
        self.gain = 10.0 ** (self.gain_db / 10.0)
        self.fading = rayleigh(rng, (self.n_ue, self.n_trp, n_subbands, self.n_rx, self.n_tx))

    def evolve(self, rng: np.random.Generator) -> None:
        """One TTI of AR(1) evolution on every link"""
        self.fading = ar1_step(self.fading, rng, self.rho)

    def link(self, ue_id: int, trp_id: int) -> LinkState:
        return LinkState(
            ue_id=ue_id, trp_id=trp_id, is_los=bool(self.is_los[ue_id, trp_id]),
            pathloss=float(self.pathloss_db[ue_id, trp_id]),
            shadowing=float(self.shadowing_db[ue_id, trp_id]),
            fading=self.fading[ue_id, trp_id].copy(),
        )

    def trace_rows(self, tti: int) -> List[dict]:
        """Per-link mean gain rows for the link trace"""
        power = np.mean(np.abs(self.fading) ** 2, axis=(-2, -1))
        mean_gain_db = self.gain_db[:, :, None] + 10 * np.log10(np.maximum(power, 1e-30))
        rows = []
        for u in range(self.n_ue):
            for b in range(self.n_trp):
                for s in range(self.n_subbands):
                    rows.append({"tti": tti, "ue": u, "trp": b, "subband": s,
                                 "mean_gain_db": float(mean_gain_db[u, b, s])})
        return rows


def subband_of_prb(n_prb: int, n_subbands: int) -> np.ndarray:
    """Subband index of every PRB; 50 PRBs over 4 subbands gives 13/13/12/12"""
    return np.array([s for s, chunk in enumerate(np.array_split(np.arange(n_prb), n_subbands))
                     for _ in chunk], dtype=int)
