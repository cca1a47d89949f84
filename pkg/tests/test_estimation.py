"""Tests for pilot frames, channel estimators and the NMSE metric."""

import numpy as np
import pytest

from tests.conftest import crandn, make_cfg
from wavelab import config
from wavelab.calculators.base import zadoff_chu
from wavelab.calculators.channel import (
    Path,
    apply_channel,
    channel_from_paths,
    effective_channel,
    identity_channel,
)
from wavelab.calculators.estimation import (
    PathEstimate,
    affine_guard_width,
    build_pilot_frame,
    estimate_affine,
    estimate_dd_embedded,
    estimate_frequency_ls,
    extract_pilot,
    genie_estimate,
    nmse,
    synthesize_effective,
)
from wavelab.calculators.transforms import DomainSymbols, demodulate, modulate
from wavelab.errors import (
    AmbiguousTap,
    DataOverflow,
    DomainMismatch,
    NoPilotMeta,
    PreconditionError,
    UnsupportedCombo,
    ZeroPilot,
)
from wavelab.schemas.frame_schemas import Domain, PrefixKind, Waveform
from wavelab.schemas.pilot_schemas import PilotKind, PilotScheme


def receive(frame, cfg, ch, snr_db=float("inf"), seed=None):
    """Modulate, pass through ``ch`` and demodulate back to the multiplexing domain."""
    t = modulate(frame, cfg)
    return demodulate(apply_channel(t, ch, snr_db=snr_db, seed=seed), cfg)


def sorted_paths(paths):
    return sorted(paths, key=lambda p: (p.delay, p.doppler))


DD_SCHEME = PilotScheme(kind=PilotKind.EMBEDDED_DD, guard_delay=2, guard_doppler=1)
AFFINE_SCHEME = PilotScheme(kind=PilotKind.EMBEDDED_AFFINE, guard_delay=2, guard_doppler=1)


# ============================================================================
# PILOT FRAMES
# ============================================================================


class TestBuildPilotFrame:
    def test_block_pilot_is_unit_modulus(self):
        cfg = make_cfg(Waveform.OFDM, M=8, N=4)
        frame, meta = build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY), np.ones(24), cfg)
        assert frame.domain == Domain.FREQUENCY
        assert np.allclose(np.abs(frame.data[:8]), 1.0)
        assert np.array_equal(meta.data_indices, np.arange(8, 32))
        assert np.allclose(frame.data[8:], 1.0)

    def test_block_pilot_on_afdm_lives_in_affine_domain(self, afdm_cfg):
        frame, meta = build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY), [], afdm_cfg)
        assert frame.domain == Domain.AFFINE
        rx = receive(frame, afdm_cfg, identity_channel(afdm_cfg))
        assert frame.energy() == pytest.approx(afdm_cfg.M)
        assert meta.known is not None and np.allclose(np.abs(meta.known), 1.0)
        assert np.allclose(rx.data, frame.data)

    def test_block_pilot_rejected_for_otfs(self, otfs_cfg):
        with pytest.raises(UnsupportedCombo):
            build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY), [], otfs_cfg)

    def test_sparse_block_pilot(self):
        cfg = make_cfg(Waveform.OFDM, M=8, N=2)
        frame, meta = build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY, pilot_spacing=2), [], cfg)
        assert meta.pilot_bins.tolist() == [0, 2, 4, 6]
        assert np.allclose(frame.data[1:8:2], 0.0)

    def test_dd_guard_region_size(self, otfs_cfg):
        frame, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        # delays 0..4 x all four Doppler bins (4 kappa + 1 >= N)
        assert meta.guard_indices.size + 1 == 20
        assert meta.data_indices.size == 32 - 20
        assert meta.pilot_index == 2 * otfs_cfg.N + otfs_cfg.N // 2

    def test_dd_guard_restricts_doppler_on_long_frames(self):
        cfg = make_cfg(Waveform.OTFS, M=16, N=16, prefix=PrefixKind.REDUCED_CP, cp=4)
        _, meta = build_pilot_frame(DD_SCHEME, [], cfg)
        assert meta.guard_indices.size + 1 == 5 * 5
        assert meta.data_indices.size == 256 - 25

    def test_index_sets_disjoint(self, otfs_cfg):
        _, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        assert not set(meta.data_indices) & set(meta.guard_indices)
        assert meta.pilot_index not in set(meta.data_indices) | set(meta.guard_indices)

    def test_pilot_only_energy(self, otfs_cfg):
        frame, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        assert frame.energy() == pytest.approx(10.0)
        assert abs(meta.pilot_value) ** 2 == pytest.approx(10.0)

    def test_data_overflow(self, otfs_cfg):
        with pytest.raises(DataOverflow):
            build_pilot_frame(DD_SCHEME, np.ones(13), otfs_cfg)

    def test_dd_pilot_must_fit(self, otfs_cfg):
        scheme = PilotScheme(kind=PilotKind.EMBEDDED_DD, guard_delay=2, guard_doppler=1, pilot_index=7)
        with pytest.raises(PreconditionError):
            build_pilot_frame(scheme, [], otfs_cfg)

    def test_affine_guard_width(self):
        assert affine_guard_width(2, 1) == 8
        assert affine_guard_width(0, 0) == 0

    def test_affine_layout(self, afdm_cfg):
        frame, meta = build_pilot_frame(AFFINE_SCHEME, np.ones(47), afdm_cfg)
        assert meta.pilot_index == 8
        assert meta.guard_indices.tolist() == [i for i in range(17) if i != 8]
        assert frame.data[8] == pytest.approx(np.sqrt(10.0))
        assert np.allclose(frame.data[17:], 1.0)

    def test_affine_guard_must_fit_block(self):
        cfg = make_cfg(Waveform.AFDM, M=16, N=1, prefix=PrefixKind.CHIRP_PERIODIC, cp=4, alpha_max=1)
        scheme = PilotScheme(kind=PilotKind.EMBEDDED_AFFINE, guard_delay=3, guard_doppler=1)
        with pytest.raises(PreconditionError, match="exceeds"):
            build_pilot_frame(scheme, [], cfg)

    def test_affine_pilot_needs_chirps(self, ofdm_cfg):
        with pytest.raises(DomainMismatch):
            build_pilot_frame(AFFINE_SCHEME, [], ofdm_cfg)

    @pytest.mark.parametrize("scheme", [DD_SCHEME, PilotScheme(kind=PilotKind.EMBEDDED_DD, guard_delay=1)])
    def test_extract_pilot_is_lossless(self, scheme, otfs_cfg):
        frame, meta = build_pilot_frame(scheme, [], otfs_cfg)
        rx = receive(frame, otfs_cfg, identity_channel(otfs_cfg))
        assert extract_pilot(rx, meta)[0] == pytest.approx(meta.pilot_value, abs=1e-10)

    def test_extract_block_pilot(self, ofdm_cfg):
        frame, meta = build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY), [], ofdm_cfg)
        rx = receive(frame, ofdm_cfg, identity_channel(ofdm_cfg))
        assert np.allclose(extract_pilot(rx, meta), meta.known, atol=1e-10)


# ============================================================================
# FREQUENCY-DOMAIN LEAST SQUARES
# ============================================================================


def two_tap_response(M, g1, delay):
    k = np.arange(M)
    return 1.0 + g1 * np.exp(-2j * np.pi * k * delay / M)


class TestFrequencyLS:
    def test_noiseless_block_pilot_is_exact(self):
        cfg = make_cfg(Waveform.OFDM, M=16, N=2, cp=5)
        ch = channel_from_paths([Path(0.8, 0.0, 0.0), Path(0.6, 4.0, 0.0)], cfg)
        frame, meta = build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY), np.ones(16), cfg)
        est = estimate_frequency_ls(receive(frame, cfg, ch), meta.known)
        k = np.arange(16)
        assert est.is_per_bin
        assert np.max(np.abs(est.response - (0.8 + 0.6 * np.exp(-2j * np.pi * k * 4 / 16)))) < 1e-10

    def test_linear_interpolation_short_delay(self):
        # linear interpolation is only this close while the response phase turns slowly
        M = 64
        known = zadoff_chu(M, 1)
        truth = two_tap_response(M, 0.1, 1)
        est = estimate_frequency_ls(known * truth, known, pilot_bins=np.arange(0, M, 2))
        assert np.max(np.abs(est.response - truth)) < 1e-3

    def test_linear_interpolation_misses_longer_delay(self):
        M = 64
        known = zadoff_chu(M, 1)
        truth = two_tap_response(M, 0.5, 4)
        est = estimate_frequency_ls(known * truth, known, pilot_bins=np.arange(0, M, 2))
        assert np.max(np.abs(est.response - truth)) > 1e-2

    def test_dft_interpolation_is_exact(self):
        M = 64
        known = zadoff_chu(M, 1)
        truth = two_tap_response(M, 0.5, 4)
        est = estimate_frequency_ls(known * truth, known, pilot_bins=np.arange(0, M, 2), interpolation="dft")
        assert np.max(np.abs(est.response - truth)) < 1e-10

    def test_dft_interpolation_needs_uniform_grid(self):
        known = zadoff_chu(16, 1)
        with pytest.raises(PreconditionError, match="uniformly spaced"):
            estimate_frequency_ls(known, known, pilot_bins=np.arange(1, 16, 2), interpolation="dft")

    def test_unknown_interpolation(self):
        known = zadoff_chu(16, 1)
        with pytest.raises(PreconditionError):
            estimate_frequency_ls(known, known, pilot_bins=np.arange(0, 16, 2), interpolation="spline")

    def test_zero_received_gives_zero(self):
        est = estimate_frequency_ls(np.zeros(8), zadoff_chu(8, 1))
        assert np.array_equal(est.response, np.zeros(8))

    def test_zero_pilot(self):
        known = np.ones(8, dtype=complex)
        known[3] = 0
        with pytest.raises(ZeroPilot):
            estimate_frequency_ls(np.ones(8), known)

    def test_needs_frequency_symbols(self, otfs_cfg):
        rx = DomainSymbols(np.zeros(otfs_cfg.payload_len), Domain.DELAY_DOPPLER, otfs_cfg)
        with pytest.raises(DomainMismatch):
            estimate_frequency_ls(rx, np.ones(otfs_cfg.M))

    def test_per_bin_synthesis_matches_truth(self):
        cfg = make_cfg(Waveform.OFDM, M=16, N=2, cp=5)
        ch = channel_from_paths([Path(0.8, 0.0, 0.0), Path(0.6j, 3.0, 0.0)], cfg)
        frame, meta = build_pilot_frame(PilotScheme(kind=PilotKind.BLOCK_FREQUENCY), [], cfg)
        est = estimate_frequency_ls(receive(frame, cfg, ch), meta.known)
        H = effective_channel(ch, cfg, Domain.FREQUENCY)
        assert np.allclose(synthesize_effective(est, cfg, Domain.FREQUENCY), H, atol=1e-10)
        assert np.allclose(synthesize_effective(est, cfg, Domain.FREQUENCY, block=True), H[:16, :16], atol=1e-10)
        assert nmse(est, ch, cfg, Domain.FREQUENCY) == config.NMSE_FLOOR_DB

    def test_per_bin_to_channel(self):
        cfg = make_cfg(Waveform.OFDM, M=16, N=1, cp=5)
        est = PathEstimate(domain=Domain.FREQUENCY, response=two_tap_response(16, 0.5, 3))
        taps = {p.delay: p.gain for p in est.to_channel(cfg).paths}
        assert taps[0.0] == pytest.approx(1.0)
        assert taps[3.0] == pytest.approx(0.5)


# ============================================================================
# EMBEDDED DELAY-DOPPLER
# ============================================================================


class TestEmbeddedDD:
    PATHS = [Path(0.9, 0.0, 0.0), Path(0.5 - 0.3j, 1.0, 1.0), Path(-0.4j, 2.0, -1.0)]

    def test_noiseless_integer_paths(self, otfs_cfg, rng):
        frame, meta = build_pilot_frame(DD_SCHEME, np.exp(2j * np.pi * rng.random(12)), otfs_cfg)
        ch = channel_from_paths(self.PATHS, otfs_cfg)
        est = estimate_dd_embedded(receive(frame, otfs_cfg, ch), meta)
        assert est.n_paths == 3
        for got, want in zip(sorted_paths(est.paths), sorted_paths(self.PATHS)):
            assert (got.delay, got.doppler) == (want.delay, want.doppler)
            assert abs(got.gain - want.gain) < 1e-9
        assert nmse(est, ch, otfs_cfg, Domain.DELAY_DOPPLER) == config.NMSE_FLOOR_DB

    def test_pure_noise_false_alarms(self, otfs_cfg, rng):
        _, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        window = meta.guard_indices.size + 1
        trials = 2000
        detections = 0
        for _ in range(trials):
            noise = crandn(rng, otfs_cfg.payload_len) / np.sqrt(2)
            est = estimate_dd_embedded(noise, meta, threshold_sigmas=3.0, noise_var=1.0)
            detections += est.n_paths + est.unmatched
        assert detections / (trials * window) < np.exp(-9 / 2)

    def test_fractional_doppler_leaks(self, otfs_cfg):
        frame, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        ch = channel_from_paths([Path(1.0, 0.0, 0.5)], otfs_cfg)
        est = estimate_dd_embedded(receive(frame, otfs_cfg, ch), meta)
        assert len({p.doppler for p in est.paths}) >= 2
        assert config.NMSE_FLOOR_DB < nmse(est, ch, otfs_cfg, Domain.DELAY_DOPPLER) < 0.0

    def test_wrapped_guard_detects_edge_doppler(self, otfs_cfg, rng):
        # 4 kappa + 1 >= N: the guard covers every Doppler bin
        paths = [Path(0.9, 0.0, 0.0), Path(0.5, 1.0, -2.0)]
        frame, meta = build_pilot_frame(DD_SCHEME, np.exp(2j * np.pi * rng.random(12)), otfs_cfg)
        ch = channel_from_paths(paths, otfs_cfg)
        est = estimate_dd_embedded(receive(frame, otfs_cfg, ch), meta)
        assert est.unmatched == 0
        assert est.n_paths == 2
        assert nmse(est, ch, otfs_cfg, Domain.DELAY_DOPPLER) == config.NMSE_FLOOR_DB

    @pytest.mark.parametrize("kappa, edge", [(0.6, 2.0), (-0.6, -2.0)])
    def test_edge_bin_follows_leakage_side(self, otfs_cfg, kappa, edge):
        frame, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        ch = channel_from_paths([Path(1.0, 0.0, kappa)], otfs_cfg)
        est = estimate_dd_embedded(receive(frame, otfs_cfg, ch), meta)
        dopplers = {p.doppler for p in est.paths}
        assert est.unmatched == 0
        assert edge in dopplers
        assert -edge not in dopplers

    def test_threshold_reported(self, otfs_cfg):
        _, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        est = estimate_dd_embedded(np.zeros(otfs_cfg.payload_len), meta, threshold_sigmas=3.0, noise_var=4.0)
        assert est.threshold == pytest.approx(6.0)
        assert est.n_paths == 0

    def test_needs_pilot_meta(self, otfs_cfg):
        with pytest.raises(NoPilotMeta):
            estimate_dd_embedded(np.zeros(otfs_cfg.payload_len), None)

    def test_rejects_affine_meta(self, afdm_cfg):
        _, meta = build_pilot_frame(AFFINE_SCHEME, [], afdm_cfg)
        with pytest.raises(NoPilotMeta):
            estimate_dd_embedded(np.zeros(afdm_cfg.payload_len), meta)

    def test_rx_domain_checked(self, otfs_cfg):
        _, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        rx = DomainSymbols(np.zeros(otfs_cfg.payload_len), Domain.FREQUENCY, otfs_cfg)
        with pytest.raises(DomainMismatch):
            estimate_dd_embedded(rx, meta)

    def test_deterministic(self, otfs_cfg):
        frame, meta = build_pilot_frame(DD_SCHEME, [], otfs_cfg)
        ch = channel_from_paths(self.PATHS, otfs_cfg)
        a = estimate_dd_embedded(receive(frame, otfs_cfg, ch, snr_db=15.0, seed=3), meta, noise_var=0.1)
        b = estimate_dd_embedded(receive(frame, otfs_cfg, ch, snr_db=15.0, seed=3), meta, noise_var=0.1)
        assert a.to_record() == b.to_record()


# ============================================================================
# EMBEDDED AFFINE
# ============================================================================


class TestEmbeddedAffine:
    PATHS = [Path(0.8, 0.0, 0.0), Path(0.4 + 0.4j, 1.0, 1.0), Path(0.3, 2.0, -1.0)]

    def test_noiseless_integer_paths(self, afdm_cfg, rng):
        frame, meta = build_pilot_frame(AFFINE_SCHEME, np.exp(2j * np.pi * rng.random(47)), afdm_cfg)
        ch = channel_from_paths(self.PATHS, afdm_cfg)
        est = estimate_affine(receive(frame, afdm_cfg, ch), meta)
        assert est.n_paths == 3
        for got, want in zip(sorted_paths(est.paths), sorted_paths(self.PATHS)):
            assert (got.delay, got.doppler) == (want.delay, want.doppler)
            assert abs(got.gain - want.gain) < 1e-9
        assert nmse(est, ch, afdm_cfg, Domain.AFFINE) == config.NMSE_FLOOR_DB

    def test_without_phase_compensation_gains_are_wrong(self, afdm_cfg):
        frame, meta = build_pilot_frame(AFFINE_SCHEME, [], afdm_cfg)
        ch = channel_from_paths(self.PATHS, afdm_cfg)
        est = estimate_affine(receive(frame, afdm_cfg, ch), meta, compensate_phase=False)
        assert est.n_paths == 3
        assert nmse(est, ch, afdm_cfg, Domain.AFFINE) > -20.0

    def test_coupled_fractional_path_breaks_path_count(self, afdm_cfg):
        frame, meta = build_pilot_frame(AFFINE_SCHEME, [], afdm_cfg)
        ch = channel_from_paths([Path(1.0, 1.5, 0.5)], afdm_cfg)
        est = estimate_affine(receive(frame, afdm_cfg, ch), meta)
        assert est.n_paths + est.unmatched != 1

    def test_zero_chirp_is_ambiguous(self):
        cfg = make_cfg(Waveform.AFDM, M=16, N=1, prefix=PrefixKind.CHIRP_PERIODIC, cp=4, c1=0.0, c2=0.0)
        scheme = PilotScheme(kind=PilotKind.EMBEDDED_AFFINE, guard_delay=2, guard_doppler=0)
        frame, meta = build_pilot_frame(scheme, [], cfg)
        ch = channel_from_paths([Path(1.0, 0.0, 0.0), Path(0.5, 1.0, 0.0)], cfg)
        with pytest.raises(AmbiguousTap, match="reachable"):
            estimate_affine(receive(frame, cfg, ch), meta)


# ============================================================================
# NMSE
# ============================================================================


class TestNmse:
    PATHS = [Path(0.8, 0.0, 0.0), Path(0.6j, 2.0, 1.0)]

    def test_perfect_estimate_hits_floor(self, otfs_cfg):
        ch = channel_from_paths(self.PATHS, otfs_cfg)
        assert nmse(genie_estimate(ch, Domain.DELAY_DOPPLER), ch, otfs_cfg, Domain.DELAY_DOPPLER) == -200.0

    def test_zero_estimate_is_zero_db(self, otfs_cfg):
        ch = channel_from_paths(self.PATHS, otfs_cfg)
        assert nmse(PathEstimate(domain=Domain.DELAY_DOPPLER), ch, otfs_cfg, Domain.DELAY_DOPPLER) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_ten_percent_perturbation(self, otfs_cfg):
        ch = channel_from_paths(self.PATHS, otfs_cfg)
        scaled = PathEstimate(
            domain=Domain.DELAY_DOPPLER, paths=tuple(Path(1.1 * p.gain, p.delay, p.doppler) for p in self.PATHS)
        )
        assert nmse(scaled, ch, otfs_cfg, Domain.DELAY_DOPPLER) == pytest.approx(-20.0, abs=1e-9)

    @pytest.mark.parametrize("d", [Domain.TIME, Domain.FREQUENCY, Domain.DELAY_DOPPLER])
    def test_domain_independent(self, d, otfs_cfg):
        ch = channel_from_paths(self.PATHS, otfs_cfg)
        est = PathEstimate(domain=d, paths=(self.PATHS[0],))
        assert nmse(est, ch, otfs_cfg, d) == pytest.approx(nmse(est, ch, otfs_cfg, Domain.TIME))

    def test_affine_needs_chirps(self, ofdm_cfg):
        ch = identity_channel(ofdm_cfg)
        with pytest.raises(DomainMismatch):
            nmse(genie_estimate(ch, Domain.AFFINE), ch, ofdm_cfg, Domain.AFFINE)

    def test_block_synthesis_rejects_dd(self, otfs_cfg):
        est = genie_estimate(identity_channel(otfs_cfg), Domain.DELAY_DOPPLER)
        with pytest.raises(DomainMismatch):
            synthesize_effective(est, otfs_cfg, Domain.DELAY_DOPPLER, block=True)


class TestPathEstimate:
    def test_record_of_path_list(self):
        est = PathEstimate(domain=Domain.AFFINE, paths=(Path(1j, 2.0, -1.0),), threshold=0.5)
        record = est.to_record()
        assert record["domain"] == "Affine"
        assert record["paths"] == [{"gain": [0.0, 1.0], "delay": 2.0, "doppler": -1.0}]

    def test_record_of_per_bin(self):
        record = PathEstimate(domain=Domain.FREQUENCY, response=np.array([1 + 2j])).to_record()
        assert record["bins"] == [[1.0, 2.0]]

    def test_frequency_response_of_paths(self):
        cfg = make_cfg(Waveform.OFDM, M=16, N=1, cp=5)
        est = PathEstimate(domain=Domain.FREQUENCY, paths=(Path(1.0, 0.0), Path(0.5, 3.0)))
        assert np.allclose(est.frequency_response(cfg), two_tap_response(16, 0.5, 3))

    def test_genie_keeps_channel(self, otfs_cfg):
        ch = channel_from_paths([Path(1.0, 1.0, 0.5)], otfs_cfg)
        est = genie_estimate(ch, Domain.DELAY_DOPPLER)
        assert est.to_channel(otfs_cfg) is ch
