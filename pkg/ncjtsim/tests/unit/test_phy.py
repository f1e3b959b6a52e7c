"""
Unit tests for the physical-layer abstraction

Covers precoder selection, the MMSE-IRC SINR against a dense-inversion
oracle, SINR properties, CSI measurement and effective-channel
composition for every scheme.
"""

import numpy as np
import pytest

from ncjtsim.core.grid import BLANK, IDLE, GridEntry, ScheduleGrid
from ncjtsim.core.phy import (
    SE_CAP, Precoder, compose_effective_channel, draw_hypothesis_precoders, evaluate_grid,
    hypothesis_for_ue, measure_csi, measure_csi_table, mmse_irc_sinr, select_precoder, select_precoders,
    sinr_to_se, wideband_precoders,
)
from ncjtsim.core.topology import CompSet


def oracle_sinr(desired, interferers, noise_power):
    """Explicit covariance assembly and dense inversion"""
    n = desired.size
    cov = noise_power * np.eye(n, dtype=complex)
    for g in interferers:
        cov = cov + np.outer(g, np.conj(g))
    return float(np.real(np.conj(desired) @ np.linalg.inv(cov) @ desired))


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def isolated_hypothesis(h, noise_power=1e-13):
    """No interferers on any subband of a single (n_subbands, n_rx, n_tx) link"""
    return hypothesis_for_ue(h[None], np.array([1.0]), np.array([False]),
                             np.zeros((1, h.shape[0], h.shape[-1])), 0.005, noise_power)


class TestPrecoder:

    def test_unit_norm_and_principal_direction(self, rng):
        """Test the precoder is unit norm and reaches the largest singular value"""
        h = cn(rng, 4, 2)
        p = select_precoder(h)

        assert np.linalg.norm(p.vector) == pytest.approx(1.0, abs=1e-12)
        sigma_max = np.linalg.svd(h, compute_uv=False)[0]
        assert np.linalg.norm(h @ p.vector) == pytest.approx(sigma_max, rel=1e-10)

    def test_phase_normalised(self, rng):
        """Test the first entry is real and non-negative"""
        v = select_precoders(cn(rng, 10, 4, 2))

        assert np.allclose(np.imag(v[:, 0]), 0.0, atol=1e-12)
        assert np.all(np.real(v[:, 0]) >= 0)

    def test_zero_channel_gives_first_unit_vector(self):
        """Test an all-zero channel selects e1"""
        p = select_precoder(np.zeros((4, 2)))

        assert np.array_equal(p.vector, np.array([1.0, 0.0]))

    def test_dominant_first_antenna(self):
        """Test diag(2, 1) selects e1"""
        p = select_precoder(np.array([[2.0, 0.0], [0.0, 1.0]]))

        assert np.allclose(p.vector, [1.0, 0.0], atol=1e-12)

    def test_tied_eigenvalues_give_first_unit_vector(self):
        """Test the identity channel selects e1"""
        p = select_precoder(np.eye(2))

        assert np.array_equal(p.vector, np.array([1.0, 0.0]))

    def test_batched_matches_single(self, rng):
        """Test stacked selection equals one-at-a-time selection"""
        h = cn(rng, 3, 2, 4, 2)
        batched = select_precoders(h)

        for idx in np.ndindex(3, 2):
            assert np.allclose(batched[idx], select_precoder(h[idx]).vector, atol=1e-12)

    def test_wideband_uses_all_subbands(self, rng):
        """Test the wideband precoder is the principal direction of the summed Gram matrix"""
        h = cn(rng, 4, 4, 2)
        w = wideband_precoders(h)

        gram = sum(np.conj(h[s]).T @ h[s] for s in range(4))
        _, vecs = np.linalg.eigh(gram)
        assert abs(np.vdot(vecs[:, -1], w)) == pytest.approx(1.0, abs=1e-10)

    def test_rejects_non_finite_channel(self):
        """Test non-finite channels are rejected"""
        h = np.ones((4, 2), dtype=complex)
        h[0, 0] = np.nan
        with pytest.raises(ValueError):
            select_precoder(h)

    def test_precoder_must_be_unit_norm(self):
        """Test Precoder rejects a non-unit vector"""
        with pytest.raises(ValueError):
            Precoder(np.array([1.0, 1.0]))


class TestMmseIrc:

    def test_matches_dense_oracle(self):
        """Test MMSE-IRC SINR against dense inversion on random draws"""
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            n_rx = int(rng.choice([2, 4]))
            n_int = int(rng.integers(0, 9))
            d = cn(rng, n_rx) * rng.uniform(0.1, 10)
            interferers = [cn(rng, n_rx) * rng.uniform(0.1, 3) for _ in range(n_int)]
            noise = rng.uniform(0.05, 2.0)

            got = mmse_irc_sinr(d, interferers, noise)
            want = oracle_sinr(d, interferers, noise)
            worst = max(worst, abs(got - want) / abs(want))

        assert worst <= 1e-9

    def test_no_interference_is_matched_filter(self, rng):
        """Test the interference-free SINR is the matched-filter SNR"""
        d = cn(rng, 4)
        assert mmse_irc_sinr(d, [], 0.5) == pytest.approx(np.linalg.norm(d) ** 2 / 0.5)

    def test_adding_interference_never_helps(self, rng):
        """Test an extra interferer never raises the SINR"""
        for _ in range(200):
            d = cn(rng, 4)
            interferers = [cn(rng, 4) for _ in range(3)]
            extra = cn(rng, 4)

            assert mmse_irc_sinr(d, interferers + [extra], 0.3) <= mmse_irc_sinr(d, interferers, 0.3) * (1 + 1e-12)

    def test_more_noise_strictly_worse(self, rng):
        """Test more noise lowers the SINR"""
        d = cn(rng, 2)
        interferers = [cn(rng, 2)]
        assert mmse_irc_sinr(d, interferers, 1.0) < mmse_irc_sinr(d, interferers, 0.5)

    def test_scaling_desired_column(self, rng):
        """Test SINR scales with the squared desired amplitude"""
        d = cn(rng, 4)
        interferers = [cn(rng, 4), cn(rng, 4)]
        alpha = 0.7 - 1.3j

        assert mmse_irc_sinr(alpha * d, interferers, 0.2) == pytest.approx(
            abs(alpha) ** 2 * mmse_irc_sinr(d, interferers, 0.2), rel=1e-10)

    def test_rejects_non_positive_noise(self, rng):
        """Test zero noise power is rejected"""
        with pytest.raises(ValueError):
            mmse_irc_sinr(cn(rng, 2), [], 0.0)


class TestSpectralEfficiency:

    @pytest.mark.parametrize("sinr, expected", [(0.0, 0.0), (1.0, 1.0), (3.0, 2.0), (-0.5, 0.0), (1e6, SE_CAP)])
    def test_capped_shannon(self, sinr, expected):
        """Test capped Shannon mapping"""
        assert sinr_to_se(sinr) == pytest.approx(expected)

    def test_array_input(self):
        """Test array input with a custom cap"""
        out = sinr_to_se(np.array([1.0, 15.0]), se_cap=3.0)
        assert out.tolist() == [1.0, 3.0]


class TestCsiMeasurement:

    @pytest.fixture
    def setup(self, rng):
        n_ue, n_trp, n_sub = 2, 3, 2
        fading = cn(rng, n_ue, n_trp, n_sub, 4, 2)
        gain = 10 ** (rng.uniform(-9, -7, size=(n_ue, n_trp)))
        serving = np.array([0, 2])
        trp_set = np.array([0, 0, 1])
        v = draw_hypothesis_precoders(rng, n_trp, n_sub, 2)
        return fading, gain, serving, trp_set, v

    def test_single_link_closed_form(self, rng):
        """Test c of an isolated single-subband link"""
        h = cn(rng, 1, 4, 2)
        report = measure_csi(0, 0, h, gain=1e-8, hypothesis=isolated_hypothesis(h), tti=4, prb_power=0.005)

        sigma2 = np.linalg.svd(h[0], compute_uv=False)[0] ** 2
        expected = min(np.log2(1 + 0.005 * 1e-8 * sigma2 / 1e-13), SE_CAP)
        assert report.spectral_efficiency == pytest.approx(expected, rel=1e-9)
        assert report.measured_tti == 4
        assert report.consumable_at(9, 5) and not report.consumable_at(8, 5)

    def test_vanishing_gain_gives_zero_rate(self, rng):
        """Test c tends to zero as the coupling gain vanishes"""
        h = cn(rng, 2, 4, 2)
        report = measure_csi(0, 0, h, gain=1e-30, hypothesis=isolated_hypothesis(h), tti=0, prb_power=0.005)

        assert 0.0 <= report.spectral_efficiency < 1e-12
        assert all(0.0 <= s < 1e-12 for s in report.subband_se)

    def test_strong_isolated_link_hits_cap(self, rng):
        """Test an isolated high-gain link reports exactly the SE cap"""
        h = cn(rng, 2, 4, 2)
        report = measure_csi(0, 0, h, gain=1e-4, hypothesis=isolated_hypothesis(h), tti=0, prb_power=0.005)

        assert report.spectral_efficiency == SE_CAP
        assert report.subband_se == (SE_CAP, SE_CAP)

    def test_table_matches_per_link_measurement(self, setup):
        """Test the batched table against per-link reports, precoders included"""
        fading, gain, serving, trp_set, v = setup
        table = measure_csi_table(fading, gain, serving, trp_set, v, prb_power=0.005,
                                  noise_power=1e-13, tti=0)

        for u in range(2):
            in_set = trp_set == trp_set[serving[u]]
            hyp = hypothesis_for_ue(fading[u], gain[u], ~in_set, v, 0.005, 1e-13)
            for b in np.flatnonzero(in_set):
                report = measure_csi(u, b, fading[u, b], gain[u, b], hyp, 0, 0.005)
                from_table = table.report(u, b)
                assert table.se[u, b] == pytest.approx(report.spectral_efficiency, rel=1e-9)
                assert np.allclose(table.subband_se[u, b], report.subband_se, rtol=1e-9)
                assert np.allclose(from_table.recommended_precoder.vector,
                                   report.recommended_precoder.vector, atol=1e-10)
                assert np.allclose(from_table.subband_precoders, report.subband_precoders, atol=1e-10)

    def test_only_in_set_pairs_reported(self, setup):
        """Test out-of-set pairs carry no CSI"""
        fading, gain, serving, trp_set, v = setup
        table = measure_csi_table(fading, gain, serving, trp_set, v, 0.005, 1e-13, 0)

        assert table.valid.tolist() == [[True, True, False], [False, False, True]]
        assert table.se[0, 2] == 0.0 and table.se[1, 0] == 0.0
        assert not np.any(table.precoders[0, 2]) and not np.any(table.wideband[1, 0])
        with pytest.raises(KeyError):
            table.report(0, 2)

    def test_report_view(self, setup):
        """Test the single-report view of a table entry"""
        fading, gain, serving, trp_set, v = setup
        table = measure_csi_table(fading, gain, serving, trp_set, v, 0.005, 1e-13, tti=11)
        report = table.report(0, 1)

        assert report.measured_tti == 11
        assert report.spectral_efficiency == pytest.approx(table.se[0, 1])
        assert np.array_equal(report.recommended_precoder.vector, table.wideband[0, 1])
        assert np.array_equal(report.subband_precoders, table.precoders[0, 1])

    def test_all_interfere_is_pessimistic(self, setup):
        """Test counting in-set TRPs as interferers never raises c"""
        fading, gain, serving, trp_set, v = setup
        excl = measure_csi_table(fading, gain, serving, trp_set, v, 0.005, 1e-13, 0, se_cap=100.0)
        incl = measure_csi_table(fading, gain, serving, trp_set, v, 0.005, 1e-13, 0, se_cap=100.0,
                                 hypothesis="all_interfere")

        assert np.all(incl.se <= excl.se + 1e-12)
        assert incl.se[0, 0] < excl.se[0, 0]

    def test_estimation_error_perturbs_reports(self, setup):
        """Test CSI estimation error changes the reports"""
        fading, gain, serving, trp_set, v = setup
        ideal = measure_csi_table(fading, gain, serving, trp_set, v, 0.005, 1e-13, 0, se_cap=100.0)
        noisy = measure_csi_table(fading, gain, serving, trp_set, v, 0.005, 1e-13, 0, se_cap=100.0,
                                  csi_error_var=0.5, error_rng=np.random.default_rng(1))

        assert not np.allclose(ideal.subband_se, noisy.subband_se)


def _row(n_trp, entries):
    row = [GridEntry(IDLE) for _ in range(n_trp)]
    for t, e in entries.items():
        row[t] = e
    return row


class TestEffectiveChannel:

    @pytest.fixture
    def channels(self, rng):
        return cn(rng, 3, 4, 2) * 1e-4

    @pytest.fixture
    def w(self, rng):
        return select_precoders(cn(rng, 3, 4, 2))

    def test_dps_rejects_two_in_set_transmitters(self, channels, w):
        """Test DPS rows allow one in-set transmitter"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {0: GridEntry(5, w[0]), 1: GridEntry(6, w[1])})

        with pytest.raises(ValueError):
            compose_effective_channel("dps", cs, row, 5, channels, [1.0] * 3, 1e-13)

    def test_dps_blanking_removes_in_set_interference(self, channels, w):
        """Test a blanked in-set TRP adds no interference"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {0: GridEntry(5, w[0]), 1: GridEntry(BLANK), 2: GridEntry(9, w[2])})
        eff = compose_effective_channel("dps", cs, row, 5, channels, [1.0] * 3, 1e-13)

        assert eff.desired_trps == (0,)
        assert len(eff.interference_columns) == 1
        assert np.allclose(eff.interference_columns[0], channels[2] @ w[2])

    def test_fncjt_rejects_partial_overlap(self, channels, w):
        """Test F-NCJT rows must be fully overlapped"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {0: GridEntry(5, w[0])})

        with pytest.raises(ValueError):
            compose_effective_channel("fncjt", cs, row, 5, channels, [1.0] * 3, 1e-13)

    def test_baseline_rejects_blank(self, channels, w):
        """Test no-coordination rows cannot blank"""
        cs = CompSet(0, (0,))
        row = _row(3, {0: GridEntry(BLANK)})

        with pytest.raises(ValueError):
            compose_effective_channel("none", cs, row, 5, channels, [1.0] * 3, 1e-13)

    def test_fncjt_two_layers(self, channels, w):
        """Test F-NCJT gives one layer per in-set TRP, each interfering with the other"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {0: GridEntry(5, w[0]), 1: GridEntry(5, w[1]), 2: GridEntry(8, w[2])})
        eff = compose_effective_channel("fncjt", cs, row, 5, channels, [0.01] * 3, 1e-13)
        sinrs = eff.layer_sinrs()

        assert eff.desired_trps == (0, 1)
        assert len(sinrs) == 2
        d = [np.sqrt(0.01) * channels[t] @ w[t] for t in range(3)]
        assert sinrs[0] == pytest.approx(oracle_sinr(d[0], [d[1], d[2]], 1e-13), rel=1e-9)

    def test_nfncjt_coincidence_equals_fncjt(self, channels, w):
        """Test a coincident NF-NCJT overlap matches F-NCJT"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {0: GridEntry(5, w[0]), 1: GridEntry(5, w[1]), 2: GridEntry(8, w[2])})

        f = compose_effective_channel("fncjt", cs, row, 5, channels, [0.01] * 3, 1e-13).layer_sinrs()
        nf = compose_effective_channel("nfncjt", cs, row, 5, channels, [0.01] * 3, 1e-13).layer_sinrs()

        assert f == nf

    def test_nfncjt_partial_overlap_interferes_in_set(self, channels, w):
        """Test an in-set TRP serving another user interferes"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {0: GridEntry(5, w[0]), 1: GridEntry(6, w[1])})
        eff = compose_effective_channel("nfncjt", cs, row, 5, channels, [0.01] * 3, 1e-13)

        assert eff.desired_trps == (0,)
        assert len(eff.interference_columns) == 1

    def test_idle_target(self, channels, w):
        """Test a target user with no serving TRP has no layers"""
        cs = CompSet(0, (0, 1))
        row = _row(3, {2: GridEntry(8, w[2])})
        eff = compose_effective_channel("nfncjt", cs, row, 5, channels, [0.01] * 3, 1e-13)

        assert eff.idle
        assert eff.layer_sinrs() == []


class TestEvaluateGrid:

    def test_matches_per_prb_composition(self, rng):
        """Test batched grid evaluation against per-PRB composition"""
        n_ue, n_trp, n_sub, n_prb = 4, 3, 2, 6
        fading = cn(rng, n_ue, n_trp, n_sub, 4, 2)
        gain = 10 ** rng.uniform(-9, -7, size=(n_ue, n_trp))
        sb = np.array([0, 0, 0, 1, 1, 1])
        grid = ScheduleGrid(n_trp, n_prb, 2)
        for t in range(n_trp):
            for p in range(n_prb):
                u = int(rng.integers(-1, n_ue))
                if u >= 0:
                    grid.assign(t, p, u, select_precoders(fading[u, t, sb[p]]))
        power = np.array([0.02, 0.01, 0.005])
        cs = CompSet(0, (0, 1, 2))

        layers = evaluate_grid(grid.users, grid.precoders, fading, gain, power, 1e-13, sb)

        assert len(layers.ue) == int((grid.users >= 0).sum())
        for ue, trp, prb, sinr in zip(layers.ue, layers.trp, layers.prb, layers.sinr):
            channels = np.sqrt(gain[ue])[:, None, None] * fading[ue, :, sb[prb]]
            eff = compose_effective_channel("nfncjt", cs, grid.row(prb), ue, channels, power, 1e-13)
            expected = eff.layer_sinrs()[eff.desired_trps.index(trp)]
            assert sinr == pytest.approx(expected, rel=1e-9)

    def test_empty_grid(self, rng):
        """Test an empty grid yields no layers"""
        grid = ScheduleGrid(2, 3, 2)
        layers = evaluate_grid(grid.users, grid.precoders, cn(rng, 1, 2, 1, 4, 2), np.ones((1, 2)),
                               np.ones(2), 1e-13, np.zeros(3, dtype=int))

        assert layers.ue.size == 0 and layers.se.size == 0

    def test_blank_entries_do_not_interfere(self, rng):
        """Test BLANK entries contribute no interference"""
        fading = cn(rng, 1, 2, 1, 4, 2)
        gain = np.full((1, 2), 1e-8)
        w = select_precoders(fading[0, 0, 0])
        grid = ScheduleGrid(2, 1, 2)
        grid.assign(0, 0, 0, w)
        grid.blank(1, 0)

        layers = evaluate_grid(grid.users, grid.precoders, fading, gain, np.array([0.01, 0.01]), 1e-13,
                               np.zeros(1, dtype=int))

        expected = 0.01 * 1e-8 * np.linalg.norm(fading[0, 0, 0] @ w) ** 2 / 1e-13
        assert layers.sinr[0] == pytest.approx(expected, rel=1e-9)
