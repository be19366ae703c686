"""STFT analysis, lag-window spectral envelope, fine structure, minimum phase.

Spectrogram convention used throughout the package: a frame holds K =
fft_size/2 amplitude values for FFT bins k = 1..K, so column j corresponds
to the linear frequency (j+1) * sample_rate / fft_size and the last column
is the Nyquist bin.  The DC bin is dropped; envelope and cepstrum code
re-synthesizes it from bin 1 when a full symmetric spectrum is needed.

The spectral envelope is the low-quefrency part of the log spectrum: the
real cepstrum is multiplied by a lag window that passes quefrencies below
half the cutoff, tapers with a raised cosine up to the cutoff, and rejects
everything above.  The fine structure is the complement, psi(S) = log S -
envelope(log S); both are exactly linear in log S, which the gradient code
relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .audio import Waveform
from .validation import as_float_array, check_positive, check_power_of_two

AMPLITUDE_FLOOR = 1e-5
DEFAULT_FFT_SIZE = 2048
DEFAULT_FRAME_SHIFT_S = 0.005
DEFAULT_LIFTER_CUTOFF_S = 0.0018


@dataclass
class AmplitudeSpectrogram:
    """T x K nonnegative magnitude frames (K = fft_size/2, bins 1..K)."""

    values: np.ndarray
    frame_shift_s: float
    sample_rate: int

    def __post_init__(self):
        self.values = as_float_array(self.values, "spectrogram values", ndim=2)
        if np.any(self.values < 0):
            raise ValueError("spectrogram values must be nonnegative")
        self.frame_shift_s = float(check_positive(self.frame_shift_s, "frame_shift_s"))
        self.sample_rate = int(check_positive(self.sample_rate, "sample_rate"))

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def bin_frequencies(self) -> np.ndarray:
        """Linear frequency of each column: (j+1) * fs / (2K)."""
        K = self.n_bins
        return (np.arange(K) + 1.0) * self.sample_rate / (2.0 * K)

    @property
    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.frame_shift_s


@dataclass
class SpectralEnvelope:
    """Smooth log-amplitude envelope, T x K, natural log."""

    log_values: np.ndarray

    def __post_init__(self):
        self.log_values = as_float_array(self.log_values, "envelope log_values", ndim=2)

    @property
    def amplitude(self) -> np.ndarray:
        return np.exp(self.log_values)


@dataclass
class FineStructureSpectrum:
    """Log-domain residual after envelope removal, T x K."""

    values: np.ndarray

    def __post_init__(self):
        self.values = as_float_array(self.values, "fine structure values", ndim=2)


def stft_amplitude(w: Waveform, fft_size=DEFAULT_FFT_SIZE,
                   frame_shift_s=DEFAULT_FRAME_SHIFT_S,
                   window="hann", pad_mode="reflect") -> AmplitudeSpectrogram:
    """Centered-frame amplitude STFT with K = fft_size/2 columns (bins 1..K).

    Frame t is centered at sample t*hop; T = floor(len/hop) + 1.  Edge
    frames are completed by reflection by default, which keeps harmonic
    structure intact where a zero pad would smear it; "constant" selects
    zero padding.
    """
    fft_size = check_power_of_two(fft_size, "fft_size")
    if len(w) == 0:
        raise ValueError("cannot analyze an empty waveform")
    hop = int(round(frame_shift_s * w.sample_rate))
    check_positive(hop, "hop (frame_shift_s * sample_rate)")
    if window == "hann":
        win = scipy.signal.get_window("hann", fft_size, fftbins=True)
    elif window == "rectangular":
        win = np.ones(fft_size)
    else:
        raise ValueError(f"unsupported window {window!r}")

    n = len(w.samples)
    n_frames = n // hop + 1
    half = fft_size // 2
    tail = half + (n_frames - 1) * hop
    if pad_mode == "reflect" and n > max(half, tail):
        padded = np.pad(w.samples, (half, tail), mode="reflect")
    elif pad_mode in ("reflect", "constant"):
        padded = np.pad(w.samples, (half, tail), mode="constant")
    else:
        raise ValueError(f"unsupported pad_mode {pad_mode!r}")
    starts = np.arange(n_frames) * hop
    idx = starts[:, None] + np.arange(fft_size)[None, :]
    frames = padded[idx] * win
    spec = np.abs(np.fft.rfft(frames, axis=1))
    # bins 1..K: drop DC, keep Nyquist as the last column
    return AmplitudeSpectrogram(spec[:, 1:], frame_shift_s, w.sample_rate)


class FineStructureOperator:
    """Lag-window envelope W and fine-structure operator (I - W) on log spectra.

    Both directions (forward and adjoint) run in O(T K log K) via FFTs over
    the symmetric 2K-point embedding of the K-bin half spectrum.  The DC
    value of the embedding is copied from bin 1, which keeps the whole
    operator linear.
    """

    def __init__(self, n_bins, sample_rate, cutoff_s=DEFAULT_LIFTER_CUTOFF_S,
                 amplitude_floor=AMPLITUDE_FLOOR):
        self.n_bins = int(n_bins)
        self.sample_rate = int(sample_rate)
        self.cutoff_s = float(cutoff_s)
        self.amplitude_floor = float(amplitude_floor)
        self.lag_window = _raised_cosine_lag_window(
            2 * self.n_bins, self.sample_rate, self.cutoff_s)

    def _embed(self, x):
        """Symmetric 2K-point spectrum from K half-spectrum columns (bins 1..K).

        The missing DC sample is filled by quadratic extrapolation through
        bins 1..3, which keeps smooth (low-quefrency) spectra exact while
        staying linear in the input.
        """
        T, K = x.shape
        full = np.empty((T, 2 * K))
        full[:, 0] = 3.0 * x[:, 0] - 3.0 * x[:, 1] + x[:, 2]
        full[:, 1:K + 1] = x
        full[:, K + 1:] = x[:, K - 2::-1]
        return full

    def envelope(self, log_spec):
        """Apply the lag-window smoother W to T x K log magnitudes."""
        log_spec = np.atleast_2d(log_spec)
        K = self.n_bins
        full = self._embed(log_spec)
        ceps = np.fft.irfft(full[:, :K + 1], n=2 * K, axis=1)
        ceps *= self.lag_window
        smooth = np.fft.rfft(ceps, axis=1).real
        return smooth[:, 1:K + 1]

    def fine_structure(self, log_spec):
        """(I - W) applied to log magnitudes."""
        log_spec = np.atleast_2d(log_spec)
        return log_spec - self.envelope(log_spec)

    def log_clipped(self, amplitudes):
        return np.log(np.maximum(amplitudes, self.amplitude_floor))

    def psi(self, amplitudes):
        """Fine structure of an amplitude array: (I - W) log(max(S, floor))."""
        return self.fine_structure(self.log_clipped(amplitudes))

    def envelope_adjoint(self, grad):
        """Adjoint of ``envelope``: maps d(loss)/d(envelope) to d(loss)/d(log_spec).

        envelope = P R M with M the symmetric embedding, R the cepstral
        windowing (diagonal in the DFT basis) and P the projection onto
        bins 1..K; the adjoint composes the transposes in reverse.
        """
        grad = np.atleast_2d(grad)
        T, K = grad.shape
        z = np.zeros((T, 2 * K))
        z[:, 1:K + 1] = grad
        # R^T = F^{-1} diag(l) F  (R itself is F diag(l) F^{-1})
        y = np.fft.ifft(self.lag_window * np.fft.fft(z, axis=1), axis=1).real
        out = y[:, 1:K + 1].copy()
        out[:, :K - 1] += y[:, :K:-1]
        # transpose of the quadratic DC fill
        out[:, 0] += 3.0 * y[:, 0]
        out[:, 1] -= 3.0 * y[:, 0]
        out[:, 2] += y[:, 0]
        return out

    def fine_structure_adjoint(self, grad):
        """Adjoint of (I - W)."""
        grad = np.atleast_2d(grad)
        return grad - self.envelope_adjoint(grad)

    def psi_backward(self, grad_psi, amplitudes):
        """Chain d(loss)/d(psi) back to d(loss)/d(amplitudes).

        The log floor gates the gradient: bins at or below the floor are
        constant in the forward pass and receive zero gradient.
        """
        g_log = self.fine_structure_adjoint(grad_psi)
        active = amplitudes > self.amplitude_floor
        return np.where(active, g_log / np.maximum(amplitudes, self.amplitude_floor), 0.0)


def _raised_cosine_lag_window(n_fft, sample_rate, cutoff_s):
    """Symmetric lag window: 1 below cutoff/2, raised-cosine taper to 0 at cutoff."""
    q = np.minimum(np.arange(n_fft), n_fft - np.arange(n_fft)) / float(sample_rate)
    half = 0.5 * cutoff_s
    w = np.zeros(n_fft)
    w[q < half] = 1.0
    taper = (q >= half) & (q <= cutoff_s)
    w[taper] = 0.5 * (1.0 + np.cos(np.pi * (q[taper] - half) / half))
    return w


_OPERATOR_CACHE: dict = {}


def default_operator(S: AmplitudeSpectrogram,
                     cutoff_s=DEFAULT_LIFTER_CUTOFF_S) -> FineStructureOperator:
    """Shared FineStructureOperator for a spectrogram's geometry (cached)."""
    key = (S.n_bins, S.sample_rate, float(cutoff_s))
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        op = FineStructureOperator(S.n_bins, S.sample_rate, cutoff_s)
        _OPERATOR_CACHE[key] = op
    return op


def lag_window_envelope(S: AmplitudeSpectrogram,
                        lifter_cutoff_s=DEFAULT_LIFTER_CUTOFF_S) -> SpectralEnvelope:
    """Smooth spectral envelope of an amplitude spectrogram (natural log)."""
    op = default_operator(S, lifter_cutoff_s)
    return SpectralEnvelope(op.envelope(op.log_clipped(S.values)))


def fine_structure(S: AmplitudeSpectrogram,
                   lifter_cutoff_s=DEFAULT_LIFTER_CUTOFF_S) -> FineStructureSpectrum:
    """psi(S) = log(max(S, floor)) - envelope(log(max(S, floor)))."""
    op = default_operator(S, lifter_cutoff_s)
    return FineStructureSpectrum(op.psi(S.values))


def minimum_phase_response(log_magnitude) -> np.ndarray:
    """Minimum-phase complex spectra matching the given T x K log magnitudes.

    Phase comes from the Hilbert relation via cepstral folding: the real
    cepstrum of the log magnitude is doubled at positive quefrencies and
    zeroed at negative ones.  The returned magnitude equals exp(input).
    """
    full = _minimum_phase_half_spectrum(np.atleast_2d(log_magnitude))
    return full[:, 1:]


def _minimum_phase_half_spectrum(log_magnitude):
    """Complex min-phase half spectrum on bins 0..K (DC extrapolated)."""
    log_magnitude = np.atleast_2d(log_magnitude)
    T, K = log_magnitude.shape
    full = np.empty((T, 2 * K))
    full[:, 0] = (3.0 * log_magnitude[:, 0] - 3.0 * log_magnitude[:, 1]
                  + log_magnitude[:, 2])
    full[:, 1:K + 1] = log_magnitude
    full[:, K + 1:] = log_magnitude[:, K - 2::-1]
    ceps = np.fft.irfft(full[:, :K + 1], n=2 * K, axis=1)
    fold = np.ones(2 * K)
    fold[1:K] = 2.0
    fold[K + 1:] = 0.0
    analytic = np.fft.rfft(ceps * fold, axis=1)
    return np.exp(analytic)


def minimum_phase_impulse_response(log_magnitude) -> np.ndarray:
    """Causal impulse responses (length 2K) realizing the min-phase spectra."""
    half = _minimum_phase_half_spectrum(np.atleast_2d(log_magnitude))
    K = half.shape[1] - 1
    return np.fft.irfft(half, n=2 * K, axis=1)
