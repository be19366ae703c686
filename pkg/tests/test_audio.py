"""Waveform/label I/O, resampling, and unit conversions."""

import numpy as np
import pytest
from scipy.io import wavfile

from pitchopt.audio import (PitchLabelTrack, Waveform, load_pitch_labels,
                            load_wav, resample, save_wav, semitone_to_hz)


def sine(freq, duration, rate, amp=0.5):
    t = np.arange(int(duration * rate)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


class TestLoadWav:
    def test_silence(self, tmp_path):
        path = tmp_path / "silence.wav"
        wavfile.write(path, 24000, np.zeros(24000, dtype=np.int16))
        w = load_wav(path)
        assert w.sample_rate == 24000
        assert len(w) == 24000
        assert np.all(w.samples == 0.0)

    def test_int16_max_scaling(self, tmp_path):
        path = tmp_path / "max.wav"
        wavfile.write(path, 24000, np.array([32767, -32768], dtype=np.int16))
        w = load_wav(path)
        assert w.samples[0] == pytest.approx(32767 / 32768)
        assert w.samples[1] == pytest.approx(-1.0)

    def test_sine_fixture_fft_peak(self, tmp_path):
        # independent oracle: locate the FFT peak of the stored file
        path = tmp_path / "a440.wav"
        data = sine(440.0, 1.0, 24000)
        wavfile.write(path, 24000, data.astype(np.float32))
        w = load_wav(path)
        spectrum = np.abs(np.fft.rfft(w.samples))
        peak_hz = np.argmax(spectrum) * 24000 / len(w.samples)
        assert abs(peak_hz - 440.0) < 2.0

    def test_stereo_mix_and_channel_select(self, tmp_path):
        path = tmp_path / "stereo.wav"
        left = sine(200.0, 0.1, 24000)
        right = sine(400.0, 0.1, 24000)
        wavfile.write(path, 24000,
                      np.stack([left, right], axis=1).astype(np.float32))
        mixed = load_wav(path)
        np.testing.assert_allclose(mixed.samples, (left + right) / 2, atol=1e-7)
        np.testing.assert_allclose(load_wav(path, channel="left").samples,
                                   left, atol=1e-7)
        np.testing.assert_allclose(load_wav(path, channel="right").samples,
                                   right, atol=1e-7)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_wav(tmp_path / "nope.wav")

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "garbage.wav"
        path.write_bytes(b"not a wav file at all")
        with pytest.raises(ValueError, match="cannot read"):
            load_wav(path)


class TestSaveLoadRoundTrip:
    def test_float32_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        w = Waveform(rng.uniform(-1, 1, 5000).astype(np.float32).astype(np.float64),
                     24000)
        path = tmp_path / "rt.wav"
        save_wav(path, w)
        back = load_wav(path)
        assert np.array_equal(back.samples, w.samples)
        assert back.sample_rate == 24000


class TestResample:
    def test_identity(self):
        w = Waveform(sine(100.0, 0.5, 24000), 24000)
        out = resample(w, 24000)
        np.testing.assert_array_equal(out.samples, w.samples)

    def test_length_ratio(self):
        w = Waveform(sine(100.0, 1.0, 48000), 48000)
        out = resample(w, 24000)
        assert len(out) == 24000

    def test_sine_content_preserved(self):
        # oracle: directly synthesized sine at the target rate
        w = Waveform(sine(100.0, 1.0, 48000), 48000)
        out = resample(w, 24000)
        ref = sine(100.0, 1.0, 24000)
        corr = np.corrcoef(out.samples, ref)[0, 1]
        assert corr > 0.999

    def test_up_down_snr(self):
        # band-limited multi-sine survives a 24k -> 48k -> 24k round trip
        rate = 24000
        t = np.arange(rate) / rate
        rng = np.random.default_rng(1)
        x = np.zeros_like(t)
        for f in (100, 350, 990, 2400, 4000):
            x += 0.15 * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        w = Waveform(x, rate)
        back = resample(resample(w, 2 * rate), rate)
        err = back.samples - x
        snr = 10 * np.log10(np.sum(x ** 2) / np.sum(err ** 2))
        assert snr > 60.0


class TestPitchLabels:
    def test_two_column_passthrough(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("0.010 220.0\n0.020 221.0\n")
        track = load_pitch_labels(path)
        assert track.times[0] == pytest.approx(0.010)
        assert track.f0_hz[0] == pytest.approx(220.0)

    def test_semitone_a4(self, tmp_path):
        path = tmp_path / "st.txt"
        path.write_text("69\n57\n0\n")
        track = load_pitch_labels(path, frame_shift_s=0.005, units="semitone")
        assert track.f0_hz[0] == pytest.approx(440.0)
        assert track.f0_hz[1] == pytest.approx(220.0)
        assert track.f0_hz[2] == 0.0
        np.testing.assert_allclose(track.times, [0.0, 0.005, 0.010])

    def test_semitone_to_hz_scalar(self):
        assert semitone_to_hz(69) == pytest.approx(440.0)
        assert semitone_to_hz(57) == pytest.approx(220.0)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0.01 abc\n")
        with pytest.raises(ValueError, match="non-numeric"):
            load_pitch_labels(path)

    def test_non_monotone_rejected(self, tmp_path):
        path = tmp_path / "order.txt"
        path.write_text("0.02 100\n0.01 100\n")
        with pytest.raises(ValueError, match="increasing"):
            load_pitch_labels(path)

    def test_out_of_range_f0_rejected(self):
        with pytest.raises(ValueError, match="20"):
            PitchLabelTrack(np.array([0.0]), np.array([5.0]))
