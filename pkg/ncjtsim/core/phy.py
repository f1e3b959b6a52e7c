"""
Physical-layer abstraction

Rank-1 precoder selection, effective-channel composition for DPS,
F-NCJT and NF-NCJT, MMSE-IRC per-layer SINR, the SINR to spectral
efficiency mapping and CSI report generation.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ncjtsim.core.grid import BLANK, GridEntry
from ncjtsim.core.topology import CompSet

logger = logging.getLogger("ncjtsim.phy")

SE_CAP = 7.4
NORM_TOL = 1e-12
_PHASE_TOL = 1e-12
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Precoder:
    vector: np.ndarray

    def __post_init__(self):
        norm = np.linalg.norm(self.vector)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"precoder must have unit norm, got {norm}")


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate so the first non-negligible entry is real and non-negative"""
    mags = np.abs(v)
    first = np.argmax(mags > _PHASE_TOL, axis=-1)
    pivot = np.take_along_axis(v, first[..., None], axis=-1)
    pivot_mag = np.abs(pivot)
    phase = np.where(pivot_mag > 0, pivot / np.where(pivot_mag > 0, pivot_mag, 1.0), 1.0)
    out = v * np.conj(phase)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def select_precoders(h: np.ndarray) -> np.ndarray:
    """Principal eigenvectors of H^H H for a stack of (..., n_rx, n_tx) channels.

    All-zero channels, and channels whose two largest eigenvalues tie, get e1.
    """
    h = np.asarray(h, dtype=complex)
    gram = np.einsum("...ri,...rj->...ij", np.conj(h), h)
    eigvals, eigvecs = np.linalg.eigh(gram)  # ascending
    v = eigvecs[..., :, -1]
    top = eigvals[..., -1]
    if h.shape[-1] > 1:
        degenerate = eigvals[..., -1] - eigvals[..., -2] <= _TIE_TOL * np.abs(top)
    else:
        degenerate = top <= 0
    if np.any(degenerate):
        e1 = np.zeros(h.shape[-1], dtype=complex)
        e1[0] = 1.0
        v = np.where(degenerate[..., None], e1, v)
    return _phase_normalize(v)


def wideband_precoders(h: np.ndarray) -> np.ndarray:
    """One precoder over all subbands of (..., n_subbands, n_rx, n_tx) channels"""
    h = np.asarray(h, dtype=complex)
    stacked = h.reshape(h.shape[:-3] + (h.shape[-3] * h.shape[-2], h.shape[-1]))
    return select_precoders(stacked)


def select_precoder(h_sub: np.ndarray) -> Precoder:
    h_sub = np.asarray(h_sub, dtype=complex)
    if not np.all(np.isfinite(h_sub)):
        raise ValueError("channel matrix must be finite")
    return Precoder(select_precoders(h_sub))


def mmse_irc_sinr(desired: np.ndarray, interferers: Sequence[np.ndarray], noise_power: float) -> float:
    """SINR = d^H R^-1 d with R = sum g g^H + noise * I over the interferers"""
    if noise_power <= 0:
        raise ValueError("noise power must be positive")
    d = np.asarray(desired, dtype=complex).reshape(-1)
    r = noise_power * np.eye(d.size, dtype=complex)
    for g in interferers:
        g = np.asarray(g, dtype=complex).reshape(-1)
        r += np.outer(g, g.conj())
    return float(np.real(np.vdot(d, np.linalg.solve(r, d))))


def mmse_irc_sinr_batch(desired: np.ndarray, covariance: np.ndarray) -> np.ndarray:
    """Batched d^H R^-1 d for desired (..., n_rx) and covariance (..., n_rx, n_rx)"""
    x = np.linalg.solve(covariance, desired[..., None])[..., 0]
    return np.real(np.sum(np.conj(desired) * x, axis=-1))


def sinr_to_se(sinr, se_cap: float = SE_CAP):
    """Shannon spectral efficiency capped at se_cap (bps/Hz)"""
    se = np.minimum(np.log2(1.0 + np.maximum(np.asarray(sinr, dtype=float), 0.0)), se_cap)
    return float(se) if se.ndim == 0 else se


@dataclass(frozen=True)
class CsiReport:
    ue_id: int
    trp_id: int
    recommended_precoder: Precoder
    spectral_efficiency: float  # c_{j,b}, bps/Hz
    measured_tti: int
    subband_se: Tuple[float, ...] = ()
    subband_precoders: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def consumable_at(self, tti: int, feedback_delay: int) -> bool:
        return tti >= self.measured_tti + feedback_delay


@dataclass(frozen=True)
class InterferenceHypothesis:
    """Interference assumed while a UE forms its CSI report.

    columns[s] holds the received interference columns on subband s.
    """
    columns: Tuple[Tuple[np.ndarray, ...], ...]
    noise_power: float


def draw_hypothesis_precoders(rng: np.random.Generator, n_trp: int, n_subbands: int, n_tx: int) -> np.ndarray:
    """Isotropic random unit precoders, one per (TRP, subband)"""
    v = rng.standard_normal((n_trp, n_subbands, n_tx)) + 1j * rng.standard_normal((n_trp, n_subbands, n_tx))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def hypothesis_for_ue(fading_u: np.ndarray, gain_u: np.ndarray, interferer_mask: np.ndarray,
                      precoders: np.ndarray, prb_power: float, noise_power: float) -> InterferenceHypothesis:
    """Interference columns seen by one UE from the TRPs flagged in interferer_mask.

    fading_u is (n_trp, n_subbands, n_rx, n_tx) and gain_u the linear coupling gains.
    """
    n_subbands = fading_u.shape[1]
    columns = []
    for s in range(n_subbands):
        cols = tuple(
            np.sqrt(prb_power * gain_u[o]) * fading_u[o, s] @ precoders[o, s]
            for o in np.flatnonzero(interferer_mask)
        )
        columns.append(cols)
    return InterferenceHypothesis(columns=tuple(columns), noise_power=noise_power)


def measure_csi(ue_id: int, trp_id: int, fading: np.ndarray, gain: float, hypothesis: InterferenceHypothesis,
                tti: int, prb_power: float, se_cap: float = SE_CAP) -> CsiReport:
    """CSI report of one (UE, TRP) pair.

    fading is the (n_subbands, n_rx, n_tx) link channel, gain the linear coupling gain.
    """
    n_subbands = fading.shape[0]
    precoders = select_precoders(fading)
    amp = np.sqrt(prb_power * gain)
    subband_se = []
    for s in range(n_subbands):
        desired = amp * fading[s] @ precoders[s]
        sinr = mmse_irc_sinr(desired, hypothesis.columns[s], hypothesis.noise_power)
        subband_se.append(sinr_to_se(sinr, se_cap))
    return CsiReport(
        ue_id=ue_id, trp_id=trp_id, recommended_precoder=Precoder(wideband_precoders(fading)),
        spectral_efficiency=float(np.mean(subband_se)), measured_tti=tti,
        subband_se=tuple(float(x) for x in subband_se), subband_precoders=precoders,
    )


@dataclass
class CsiTable:
    """Reports of every (UE, TRP) pair measured in one TTI.

    valid[u, t] marks pairs where t is in the UE's CoMP set; other entries are zero.
    """
    measured_tti: int
    se: np.ndarray  # (n_ue, n_trp)
    subband_se: np.ndarray  # (n_ue, n_trp, n_subbands)
    precoders: np.ndarray  # (n_ue, n_trp, n_subbands, n_tx)
    valid: np.ndarray  # (n_ue, n_trp)
    wideband: np.ndarray  # (n_ue, n_trp, n_tx)

    def report(self, ue_id: int, trp_id: int) -> CsiReport:
        """Single report view, same contents as measure_csi on that link"""
        if not self.valid[ue_id, trp_id]:
            raise KeyError(f"no CSI for UE {ue_id} at TRP {trp_id}")
        return CsiReport(
            ue_id=ue_id, trp_id=trp_id, recommended_precoder=Precoder(self.wideband[ue_id, trp_id]),
            spectral_efficiency=float(self.se[ue_id, trp_id]), measured_tti=self.measured_tti,
            subband_se=tuple(float(x) for x in self.subband_se[ue_id, trp_id]),
            subband_precoders=self.precoders[ue_id, trp_id].copy(),
        )


def measure_csi_table(fading: np.ndarray, gain: np.ndarray, serving: np.ndarray, trp_set: np.ndarray,
                      hypothesis_precoders: np.ndarray, prb_power: float, noise_power: float, tti: int,
                      se_cap: float = SE_CAP, hypothesis: str = "exclude_in_set",
                      csi_error_var: float = 0.0, error_rng: Optional[np.random.Generator] = None) -> CsiTable:
    """Vectorised measure_csi over every UE and its in-set TRPs.

    Under "exclude_in_set" only out-of-set TRPs interfere; under
    "all_interfere" every TRP other than the measured one does.
    """
    n_ue, n_trp, n_sub, n_rx, n_tx = fading.shape
    h = fading
    if csi_error_var > 0:
        rng = error_rng if error_rng is not None else np.random.default_rng()
        err = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) * np.sqrt(csi_error_var / 2)
        h = h + err

    in_set = trp_set[None, :] == trp_set[serving][:, None]  # (n_ue, n_trp)
    amp = np.sqrt(prb_power * gain)  # (n_ue, n_trp)

    # interference columns from every TRP with its hypothesis precoder
    g = np.einsum("ubsij,bsj->ubsi", h, hypothesis_precoders) * amp[:, :, None, None]
    noise = noise_power * np.eye(n_rx, dtype=complex)
    if hypothesis == "exclude_in_set":
        weight = (~in_set).astype(float)
        cov = np.einsum("ub,ubsi,ubsj->usij", weight, g, np.conj(g)) + noise
        cov_per_link = np.broadcast_to(cov[:, None], (n_ue, n_trp, n_sub, n_rx, n_rx))
    else:
        total = np.einsum("ubsi,ubsj->usij", g, np.conj(g))
        own = np.einsum("ubsi,ubsj->ubsij", g, np.conj(g))
        cov_per_link = total[:, None] - own + noise

    # only in-set pairs are reported; everything else stays zero
    h_set = h[in_set]  # (n_pairs, n_sub, n_rx, n_tx)
    w_set = select_precoders(h_set)
    desired = np.einsum("ksij,ksj->ksi", h_set, w_set) * amp[in_set][:, None, None]
    sinr = mmse_irc_sinr_batch(desired, cov_per_link[in_set])

    precoders = np.zeros((n_ue, n_trp, n_sub, n_tx), dtype=complex)
    precoders[in_set] = w_set
    wideband = np.zeros((n_ue, n_trp, n_tx), dtype=complex)
    wideband[in_set] = wideband_precoders(h_set)
    subband_se = np.zeros((n_ue, n_trp, n_sub))
    subband_se[in_set] = sinr_to_se(sinr, se_cap)
    return CsiTable(
        measured_tti=tti, se=subband_se.mean(axis=-1), subband_se=subband_se,
        precoders=precoders, valid=in_set, wideband=wideband,
    )


@dataclass(frozen=True)
class EffectiveChannel:
    desired_columns: Tuple[np.ndarray, ...]
    interference_columns: Tuple[np.ndarray, ...]
    noise_power: float
    desired_trps: Tuple[int, ...] = ()

    @property
    def idle(self) -> bool:
        """True when no in-set TRP serves the target UE on this PRB"""
        return len(self.desired_columns) == 0

    def layer_sinrs(self) -> List[float]:
        """Per-layer MMSE-IRC SINR; the other desired layers count as interference"""
        sinrs = []
        for i, d in enumerate(self.desired_columns):
            others = self.desired_columns[:i] + self.desired_columns[i + 1:]
            sinrs.append(mmse_irc_sinr(d, others + self.interference_columns, self.noise_power))
        return sinrs


def _check_row(scheme: str, comp_set: CompSet, grid_row: Sequence[GridEntry]) -> None:
    in_set = [grid_row[t] for t in comp_set.trp_ids]
    active = {e.user for e in in_set if e.is_transmitting}
    if scheme == "dps":
        if sum(e.is_transmitting for e in in_set) > 1:
            raise ValueError("DPS row has more than one transmitting in-set TRP")
    elif scheme == "fncjt":
        if len(active) > 1 or (active and any(e.user != next(iter(active)) for e in in_set)):
            raise ValueError("F-NCJT row is not fully overlapped")
    elif scheme == "none":
        if any(e.user == BLANK for e in in_set):
            raise ValueError("no-coordination row cannot contain BLANK")


def compose_effective_channel(scheme: str, comp_set: CompSet, grid_row: Sequence[GridEntry], target_ue: int,
                              channels: np.ndarray, prb_power: Sequence[float], noise_power: float) -> EffectiveChannel:
    """Effective channel of target_ue on one PRB.

    channels[t] is the (n_rx, n_tx) channel from TRP t to the target UE,
    already including the linear coupling gain as amplitude.  In-set TRPs
    serving the UE give desired layers; every other transmitting TRP,
    in-set or not, gives an interference column. BLANK and IDLE add nothing.
    """
    _check_row(scheme, comp_set, grid_row)
    desired, desired_trps, interference = [], [], []
    for t, entry in enumerate(grid_row):
        if not entry.is_transmitting:
            continue
        column = np.sqrt(prb_power[t]) * channels[t] @ entry.precoder
        if entry.user == target_ue and t in comp_set:
            desired.append(column)
            desired_trps.append(t)
        else:
            interference.append(column)
    return EffectiveChannel(desired_columns=tuple(desired), interference_columns=tuple(interference),
                            noise_power=noise_power, desired_trps=tuple(desired_trps))


@dataclass(frozen=True)
class LayerResult:
    """Per-layer outcome of one TTI: arrays over the transmitted layers"""
    ue: np.ndarray
    trp: np.ndarray
    prb: np.ndarray
    sinr: np.ndarray
    se: np.ndarray


def evaluate_grid(users: np.ndarray, precoders: np.ndarray, fading: np.ndarray, gain: np.ndarray,
                  prb_power: np.ndarray, noise_power: float, sb_of_prb: np.ndarray,
                  se_cap: float = SE_CAP) -> LayerResult:
    """Per-layer SINR of every transmitted layer in a grid.

    Same composition as compose_effective_channel + EffectiveChannel.layer_sinrs,
    batched over all layers of the TTI.
    """
    trp_idx, prb_idx = np.nonzero(users >= 0)
    ue_idx = users[trp_idx, prb_idx]
    n_layers = len(ue_idx)
    if n_layers == 0:
        empty_i, empty_f = np.zeros(0, dtype=int), np.zeros(0)
        return LayerResult(empty_i, empty_i, empty_i, empty_f, empty_f)

    n_trp, n_prb = users.shape
    n_rx = fading.shape[-2]
    tx = (users >= 0)[..., None]
    w = np.where(tx, precoders, 0.0)  # (n_trp, n_prb, n_tx)

    # received columns at each layer's UE from every TRP on that layer's PRB
    h = fading[ue_idx[:, None], np.arange(n_trp)[None, :], sb_of_prb[prb_idx][:, None]]  # (L, T, rx, tx)
    amp = np.sqrt(prb_power[None, :] * gain[ue_idx])  # (L, T)
    cols = np.einsum("ltij,ltj->lti", h, w[:, prb_idx].transpose(1, 0, 2)) * amp[..., None]

    others = np.ones((n_layers, n_trp))
    others[np.arange(n_layers), trp_idx] = 0.0
    cov = np.einsum("lt,lti,ltj->lij", others, cols, np.conj(cols)) + noise_power * np.eye(n_rx)
    desired = cols[np.arange(n_layers), trp_idx]
    sinr = mmse_irc_sinr_batch(desired, cov)
    return LayerResult(ue=ue_idx, trp=trp_idx, prb=prb_idx, sinr=sinr, se=sinr_to_se(sinr, se_cap))
