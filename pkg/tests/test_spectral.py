"""STFT, lag-window envelope, fine structure, and minimum phase."""

import numpy as np
import pytest

from pitchopt.audio import Waveform
from pitchopt.spectral import (AMPLITUDE_FLOOR, AmplitudeSpectrogram,
                               FineStructureOperator, fine_structure,
                               lag_window_envelope, minimum_phase_response,
                               minimum_phase_impulse_response, stft_amplitude)

FS = 24000


def spec_of(values):
    return AmplitudeSpectrogram(np.atleast_2d(values), 0.005, FS)


def synthetic_log_spectrum(K=1024, f0=200.0, seed=0):
    """Passband-limited envelope plus a harmonic comb, as log amplitudes."""
    k = np.arange(K)
    env = (1.2 * np.cos(2 * np.pi * 2 * (k + 1) / (2 * K))
           + 0.7 * np.cos(2 * np.pi * 5 * (k + 1) / (2 * K)))
    freq = (k + 1) * FS / (2 * K)
    comb = np.log(0.05 + 0.5 + 0.5 * np.cos(2 * np.pi * freq / f0))
    return env, comb


class TestStft:
    def test_zero_signal(self):
        S = stft_amplitude(Waveform(np.zeros(FS), FS))
        assert S.values.shape == (201, 1024)
        assert np.all(S.values == 0.0)

    def test_impulse_flat_spectrum(self):
        x = np.zeros(FS)
        x[120 * 50] = 1.0
        S = stft_amplitude(Waveform(x, FS), window="rectangular",
                           pad_mode="constant")
        np.testing.assert_allclose(S.values[50], 1.0, atol=1e-12)

    def test_sine_bin_placement(self):
        # oracle: round(500 * 2048 / 24000) = 43 (1-based FFT bin)
        t = np.arange(FS) / FS
        S = stft_amplitude(Waveform(0.5 * np.sin(2 * np.pi * 500 * t), FS))
        frame = S.values[100]
        assert np.argmax(frame) + 1 == round(500 * 2048 / 24000) == 43

    def test_independent_dft_agrees(self):
        t = np.arange(FS) / FS
        x = 0.5 * np.sin(2 * np.pi * 500 * t)
        S = stft_amplitude(Waveform(x, FS))
        hop, nfft = 120, 2048
        start = 100 * hop - nfft // 2
        seg = x[start:start + nfft] * np.hanning(nfft + 1)[:-1]
        oracle = np.abs(np.fft.rfft(seg))[1:]
        np.testing.assert_allclose(S.values[100], oracle, atol=1e-9)

    def test_empty_waveform_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            stft_amplitude(Waveform(np.zeros(0), FS))

    def test_frame_count(self):
        S = stft_amplitude(Waveform(np.zeros(10007), FS))
        assert S.n_frames == 10007 // 120 + 1

    def test_nyquist_bin_frequency(self):
        S = stft_amplitude(Waveform(np.zeros(2400), FS))
        assert S.bin_frequencies[-1] == pytest.approx(FS / 2)
        assert S.bin_frequencies[0] == pytest.approx(FS / 2048)


class TestLagWindowEnvelope:
    def test_constant_spectrogram(self):
        S = spec_of(np.full((3, 512), 2.5))
        env = lag_window_envelope(S)
        np.testing.assert_allclose(env.log_values, np.log(2.5), atol=1e-12)

    def test_passband_cosine_passes(self):
        K = 1024
        k = np.arange(K)
        logS = np.cos(2 * np.pi * 3 * (k + 1) / (2 * K))
        S = spec_of(np.exp(logS))
        env = lag_window_envelope(S)
        assert np.abs(env.log_values[0] - logS).max() < 1e-6

    def test_harmonic_ripple_rejected(self):
        # 200 Hz comb ripple lives at 5 ms quefrency, beyond the cutoff;
        # oracle: measure the attenuation of that cepstral component
        env0, comb = synthetic_log_spectrum()
        S = spec_of(np.exp(env0 + comb))
        env = lag_window_envelope(S)
        residual_ripple = env.log_values[0] - env0
        # correlate against the comb shape to measure retained amplitude
        comb_centered = comb - comb.mean()
        retained = (residual_ripple - residual_ripple.mean()) @ comb_centered
        retained /= comb_centered @ comb_centered
        assert abs(retained) < 0.05

    def test_idempotent_on_smooth_input(self):
        env0, _ = synthetic_log_spectrum()
        S = spec_of(np.exp(env0))
        once = lag_window_envelope(S)
        twice = lag_window_envelope(
            AmplitudeSpectrogram(np.exp(once.log_values), 0.005, FS))
        assert np.abs(twice.log_values - once.log_values).max() < 1e-6


class TestFineStructure:
    def test_constant_is_zero(self):
        S = spec_of(np.full((2, 512), 0.3))
        psi = fine_structure(S)
        np.testing.assert_allclose(psi.values, 0.0, atol=1e-12)

    def test_envelope_removed_from_synthetic_product(self):
        # oracle: S built as exp(envelope) * comb must return ~log comb
        env0, comb = synthetic_log_spectrum()
        S = spec_of(np.exp(env0 + comb))
        psi = fine_structure(S)
        resid = psi.values[0] - comb
        assert np.abs(resid - resid.mean()).max() < 2e-3

    def test_idempotence(self):
        env0, comb = synthetic_log_spectrum()
        S = spec_of(np.exp(env0 + comb))
        psi1 = fine_structure(S).values
        psi2 = fine_structure(spec_of(np.exp(psi1))).values
        assert np.abs(psi2 - psi1).max() < 1e-3

    def test_identity_decomposition(self):
        rng = np.random.default_rng(3)
        S = spec_of(np.exp(rng.standard_normal((4, 256))))
        env = lag_window_envelope(S).log_values
        psi = fine_structure(S).values
        np.testing.assert_allclose(
            psi + env, np.log(np.maximum(S.values, AMPLITUDE_FLOOR)),
            atol=1e-9)

    def test_linearity_of_psi_in_log_domain(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 256))
        y = rng.standard_normal((2, 256))
        op = FineStructureOperator(256, FS)
        lhs = op.fine_structure(x + y)
        rhs = op.fine_structure(x) + op.fine_structure(y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_mid_band_mean_near_zero(self):
        env0, comb = synthetic_log_spectrum()
        S = spec_of(np.exp(env0 + comb))
        psi = fine_structure(S).values[0]
        freqs = S.bin_frequencies
        band = (freqs > 300) & (freqs < 4000)
        assert abs(psi[band].mean()) < 0.2


class TestOperatorAdjoint:
    @pytest.mark.parametrize("K", [64, 256, 1024])
    def test_envelope_adjoint_identity(self, K):
        op = FineStructureOperator(K, FS)
        rng = np.random.default_rng(K)
        x = rng.standard_normal((3, K))
        y = rng.standard_normal((3, K))
        lhs = np.sum(op.envelope(x) * y)
        rhs = np.sum(x * op.envelope_adjoint(y))
        assert lhs == pytest.approx(rhs, abs=1e-10 * K)

    def test_psi_backward_matches_fd(self):
        K = 128
        op = FineStructureOperator(K, FS)
        rng = np.random.default_rng(9)
        amp = np.exp(rng.standard_normal((1, K)))
        target = rng.standard_normal((1, K))

        def loss(a):
            return np.abs(op.psi(a) - target).sum()

        g_psi = np.sign(op.psi(amp) - target)
        analytic = op.psi_backward(g_psi, amp)
        h = 1e-7
        for j in rng.choice(K, size=12, replace=False):
            bumped = amp.copy()
            bumped[0, j] += h
            hi = loss(bumped)
            bumped[0, j] -= 2 * h
            lo = loss(bumped)
            fd = (hi - lo) / (2 * h)
            assert analytic[0, j] == pytest.approx(fd, rel=1e-4, abs=1e-6)


class TestMinimumPhase:
    def test_flat_zero_log_magnitude(self):
        spec = minimum_phase_response(np.zeros((1, 256)))
        np.testing.assert_allclose(spec, 1.0 + 0.0j, atol=1e-12)

    def test_magnitude_preserved(self):
        rng = np.random.default_rng(11)
        # smooth log magnitudes (envelope-like), the intended input domain
        K = 512
        k = np.arange(K)
        logmag = np.zeros((3, K))
        for i in range(3):
            for q in range(1, 6):
                logmag[i] += rng.normal(0, 0.5) * np.cos(
                    2 * np.pi * q * (k + 1) / (2 * K))
        spec = minimum_phase_response(logmag)
        np.testing.assert_allclose(np.abs(spec), np.exp(logmag), rtol=1e-9)

    def test_energy_concentrated_early(self):
        # single-resonance envelope: min-phase IR leads with its energy
        K = 1024
        freqs = (np.arange(K) + 1) * FS / (2 * K)
        logmag = -0.5 * np.log1p(((freqs - 700.0) / 130.0) ** 2)[None, :]
        ir = minimum_phase_impulse_response(logmag)[0]
        energy = ir ** 2
        quarter = len(ir) // 4
        assert energy[:quarter].sum() / energy.sum() >= 0.90
