"""Constant-Q transform analyzer and the scope-shift used for pitch shifting.

The analyzer covers 205 bins at 24 bins per octave from 32.70 Hz with a
0.5 filter scale (halved kernel bandwidth, i.e. shorter kernels, to follow
fast pitch movement).  A pitch-shifted view is obtained without touching
the audio by sliding the 176-bin analysis window across the 205 computed
bins; each 2-bin slide equals one semitone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .audio import Waveform
from .validation import as_float_array, check_positive

DEFAULT_F_MIN = 32.70
DEFAULT_N_BINS = 205
DEFAULT_BINS_PER_OCTAVE = 24
DEFAULT_FILTER_SCALE = 0.5
SCOPE_BINS = 176
MAX_SCOPE_SHIFT = (DEFAULT_N_BINS - SCOPE_BINS) // 2  # 14


@dataclass
class CqtMatrix:
    """T x F_c constant-Q magnitudes on a log-frequency grid."""

    magnitudes: np.ndarray
    f_min: float
    bins_per_octave: int
    frame_shift_s: float

    def __post_init__(self):
        self.magnitudes = as_float_array(self.magnitudes, "CQT magnitudes", ndim=2)

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def bin_frequencies(self) -> np.ndarray:
        exponents = np.arange(self.n_bins) / float(self.bins_per_octave)
        return self.f_min * np.exp2(exponents)


class CqtAnalyzer:
    """Precomputed complex kernel bank; analysis is a strided correlation.

    Construction is one-time; ``analyze`` has no mutable state and is safe
    to call concurrently.
    """

    def __init__(self, sample_rate=24000, f_min=DEFAULT_F_MIN,
                 n_bins=DEFAULT_N_BINS, bins_per_octave=DEFAULT_BINS_PER_OCTAVE,
                 filter_scale=DEFAULT_FILTER_SCALE, frame_shift_s=0.005):
        self.sample_rate = int(check_positive(sample_rate, "sample_rate"))
        self.f_min = float(check_positive(f_min, "f_min"))
        self.n_bins = int(check_positive(n_bins, "n_bins"))
        self.bins_per_octave = int(check_positive(bins_per_octave, "bins_per_octave"))
        self.filter_scale = float(check_positive(filter_scale, "filter_scale"))
        self.frame_shift_s = float(check_positive(frame_shift_s, "frame_shift_s"))
        self.hop = int(round(frame_shift_s * sample_rate))

        self.frequencies = self.f_min * np.exp2(
            np.arange(self.n_bins) / self.bins_per_octave)
        if self.frequencies[-1] >= self.sample_rate / 2:
            raise ValueError("CQT grid exceeds Nyquist; reduce n_bins or f_min")

        q = self.filter_scale / (2.0 ** (1.0 / self.bins_per_octave) - 1.0)
        self._kernels = []
        for f in self.frequencies:
            length = int(round(q * self.sample_rate / f))
            length += (length % 2 == 0)  # odd length keeps the kernel centered
            t = np.arange(length) - (length - 1) / 2.0
            win = scipy.signal.get_window("hann", length, fftbins=False)
            kernel = win * np.exp(-2j * np.pi * f * t / self.sample_rate)
            kernel /= win.sum() / 2.0  # unit response to a matched unit sine
            self._kernels.append(kernel)
        self.max_kernel_length = max(len(k) for k in self._kernels)

    def analyze(self, w: Waveform) -> CqtMatrix:
        """Magnitude CQT of a 24 kHz waveform at the configured hop."""
        if w.sample_rate != self.sample_rate:
            raise ValueError(
                f"analyzer built for {self.sample_rate} Hz, got {w.sample_rate} Hz")
        if len(w) < self.max_kernel_length:
            raise ValueError(
                f"waveform too short for CQT analysis: {len(w)} samples, "
                f"longest kernel needs {self.max_kernel_length}")
        n = len(w.samples)
        n_frames = n // self.hop + 1
        centers = np.arange(n_frames) * self.hop
        pad = self.max_kernel_length // 2 + 1
        x = np.concatenate([np.zeros(pad), w.samples, np.zeros(pad)])
        mags = np.empty((n_frames, self.n_bins))
        for j, kernel in enumerate(self._kernels):
            # correlation with the kernel centered on each frame instant
            corr = scipy.signal.fftconvolve(x, np.conj(kernel[::-1]), mode="same")
            mags[:, j] = np.abs(corr[centers + pad])
        return CqtMatrix(mags, self.f_min, self.bins_per_octave, self.frame_shift_s)


def shift_scope(C: CqtMatrix, d_bins: int, scope_bins=SCOPE_BINS) -> CqtMatrix:
    """Slide the central analysis window of a CQT by ``d_bins``.

    Positive shifts move the window up in frequency, which makes any fixed
    spectral content appear ``d_bins`` lower inside the window: the view of
    a tone shifted by -d_bins/2 semitones.
    """
    margin = (C.n_bins - scope_bins) // 2
    if margin < 0:
        raise ValueError(f"CQT has fewer than {scope_bins} bins")
    d_bins = int(d_bins)
    if abs(d_bins) > margin:
        raise ValueError(
            f"scope shift {d_bins} out of range; |d_bins| must be <= {margin}")
    start = margin + d_bins
    window = C.magnitudes[:, start:start + scope_bins]
    f_min = C.f_min * 2.0 ** (start / C.bins_per_octave)
    return CqtMatrix(window.copy(), f_min, C.bins_per_octave, C.frame_shift_s)


def log_compress(C: CqtMatrix, gamma=1e-3) -> np.ndarray:
    """Dynamic-range compression log(1 + C/gamma) for encoder-style consumers."""
    return np.log1p(C.magnitudes / gamma)
