"""Subharmonic-summation pitch prior over a log-spaced frequency grid.

The guide is built from the exponentiated fine structure of the input
spectrogram: summing its values at integer multiples of each candidate
frequency (with geometrically decaying weights) scores how well the
candidate explains the observed harmonic comb, and subharmonics of the true
f0 lose because their even multiples fall between harmonics.  Rows are
max-normalized to 1; frames with no signal stay all-zero and are flagged
silent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .spectral import AmplitudeSpectrogram, default_operator
from .validation import as_float_array, check_same_shape

GUIDE_F_MIN = 20.0
GUIDE_F_MAX = 2000.0
GUIDE_BINS = 1024
DEFAULT_N_HARMONICS = 8
DEFAULT_HARMONIC_DECAY = 0.86
DEFAULT_HINGE_MARGIN = 0.5

_LOG2_SPAN = np.log2(GUIDE_F_MAX / GUIDE_F_MIN)  # log2(100)


def guide_frequencies(n_bins=GUIDE_BINS) -> np.ndarray:
    """Log-spaced grid 20 Hz .. 2 kHz with exact endpoints."""
    ratio = GUIDE_F_MAX / GUIDE_F_MIN
    return GUIDE_F_MIN * ratio ** (np.arange(n_bins) / (n_bins - 1.0))


@dataclass
class PitchGuide:
    """T x F prior with per-frame maximum 1 (0 rows on silent frames)."""

    values: np.ndarray
    silent: np.ndarray

    def __post_init__(self):
        self.values = as_float_array(self.values, "guide values", ndim=2)
        self.silent = np.asarray(self.silent, dtype=bool)
        if self.silent.shape != (self.values.shape[0],):
            raise ValueError("silent flags must have one entry per frame")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return guide_frequencies(self.values.shape[1])


@dataclass
class PitchDistribution:
    """Row-stochastic T x F distribution over the guide grid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = as_float_array(self.values, "distribution values", ndim=2)
        if np.any(self.values < 0):
            raise ValueError("distribution values must be nonnegative")
        rows = self.values.sum(axis=1)
        if self.values.shape[0] and not np.allclose(rows, 1.0, atol=1e-6):
            raise ValueError("distribution rows must sum to 1")


def shs(fine_spec_exp, bin_frequencies, n_harmonics=DEFAULT_N_HARMONICS,
        decay=DEFAULT_HARMONIC_DECAY, frequencies=None) -> np.ndarray:
    """Subharmonic summation onto the guide grid.

    out[t, f] = sum_n decay^(n-1) * L(t, n*f), where L interpolates the
    input linearly along its linear frequency axis and multiples beyond the
    input's last bin are skipped.  Exactly linear in the input.
    """
    spec = as_float_array(fine_spec_exp, "fine_spec_exp", ndim=2)
    bin_frequencies = np.asarray(bin_frequencies, dtype=np.float64)
    if frequencies is None:
        frequencies = guide_frequencies()
    T = spec.shape[0]
    K = spec.shape[1]
    nyquist = bin_frequencies[-1]
    out = np.zeros((T, len(frequencies)))
    for n in range(1, n_harmonics + 1):
        target = n * frequencies
        valid = target <= nyquist
        if not np.any(valid):
            break
        pos = np.interp(target[valid], bin_frequencies, np.arange(K))
        i0 = np.floor(pos).astype(int)
        i1 = np.minimum(i0 + 1, K - 1)
        w1 = pos - i0
        contrib = spec[:, i0] * (1.0 - w1) + spec[:, i1] * w1
        out[:, valid] += decay ** (n - 1) * contrib
    return out


def build_pitch_guide(S: AmplitudeSpectrogram, n_harmonics=DEFAULT_N_HARMONICS,
                      decay=DEFAULT_HARMONIC_DECAY,
                      lifter_cutoff_s=None) -> PitchGuide:
    """SHS of exp(fine structure), max-normalized per frame.

    Frames whose raw amplitudes never exceed the log floor carry no usable
    harmonic information; their rows are zeroed and flagged silent instead
    of being normalized.
    """
    op = (default_operator(S) if lifter_cutoff_s is None
          else default_operator(S, lifter_cutoff_s))
    silent = S.values.max(axis=1) <= op.amplitude_floor
    raw = shs(np.exp(op.psi(S.values)), S.bin_frequencies, n_harmonics, decay)
    raw[silent] = 0.0
    peak = raw.max(axis=1)
    flat = peak <= 0
    norm = np.where(flat, 1.0, peak)
    values = raw / norm[:, None]
    return PitchGuide(values, silent | flat)


def guide_loss(P: PitchDistribution, G: PitchGuide,
               m=DEFAULT_HINGE_MARGIN) -> float:
    """Hinge loss max(1 - <P_t, G_t> - m, 0) averaged over non-silent frames."""
    check_same_shape(P.values, G.values, "distribution", "guide")
    inner = np.sum(P.values * G.values, axis=1)
    hinge = np.maximum(1.0 - inner - m, 0.0)
    active = ~G.silent
    if not np.any(active):
        return 0.0
    return float(hinge[active].mean())


def shifted_guide_loss(P_shift: PitchDistribution, G: PitchGuide,
                       delta_f_bins: int, m=DEFAULT_HINGE_MARGIN) -> float:
    """Guide hinge against the guide displaced by ``delta_f_bins`` grid bins.

    The shifted distribution at bin f is scored against G[t, f - delta_f];
    bins that fall off the grid contribute zero, so a shift beyond the grid
    leaves the hinge at max(1 - m, 0).
    """
    check_same_shape(P_shift.values, G.values, "distribution", "guide")
    delta = int(delta_f_bins)
    F = G.values.shape[1]
    shifted = np.zeros_like(G.values)
    if delta >= 0:
        if delta < F:
            shifted[:, delta:] = G.values[:, :F - delta]
    else:
        if -delta < F:
            shifted[:, :F + delta] = G.values[:, -delta:]
    inner = np.sum(P_shift.values * shifted, axis=1)
    hinge = np.maximum(1.0 - inner - m, 0.0)
    active = ~G.silent
    if not np.any(active):
        return 0.0
    return float(hinge[active].mean())


def cqt_shift_to_guide_bins(d_bins: int, bins_per_octave=24,
                            n_guide_bins=GUIDE_BINS) -> int:
    """Map a CQT scope shift to the equivalent guide-grid bin shift.

    Both axes are log-uniform, so the conversion is the ratio of bins per
    octave: delta_f = round((d_bins / bins_per_octave) * n_guide_bins /
    log2(f_max / f_min)).
    """
    return int(round((d_bins / bins_per_octave) * n_guide_bins / _LOG2_SPAN))


def _grid_positions(f0_hz, n_bins):
    """Fractional guide-grid position of each frequency (log-uniform grid)."""
    f0 = np.asarray(f0_hz, dtype=np.float64)
    return (n_bins - 1.0) * np.log2(f0 / GUIDE_F_MIN) / _LOG2_SPAN


def guide_value_at(G: PitchGuide, t: int, f0_hz: float) -> float:
    """Interpolate frame t of the guide at an arbitrary frequency.

    Interpolation is linear in log2 frequency.  Out-of-range frequencies
    are clamped to the grid edge with a warning.
    """
    if not (GUIDE_F_MIN <= f0_hz <= GUIDE_F_MAX):
        warnings.warn(
            f"frequency {f0_hz:.2f} Hz outside the guide range; clamping",
            stacklevel=2)
        f0_hz = float(np.clip(f0_hz, GUIDE_F_MIN, GUIDE_F_MAX))
    value, _ = _interp_row(G.values[t], np.array([f0_hz]))
    return float(value[0])


def guide_values_and_slopes(G: PitchGuide, f0_hz):
    """Vectorized guide lookup for one frequency per frame.

    Returns (values, slopes) where slopes are derivatives with respect to
    log2 frequency, the piecewise-constant slope of the linear interpolant.
    Used by the optimizer's hinge term.
    """
    f0 = np.clip(np.asarray(f0_hz, dtype=np.float64), GUIDE_F_MIN, GUIDE_F_MAX)
    T, F = G.values.shape
    pos = _grid_positions(f0, F)
    i0 = np.clip(np.floor(pos).astype(int), 0, F - 2)
    frac = pos - i0
    rows = np.arange(T)
    g0 = G.values[rows, i0]
    g1 = G.values[rows, i0 + 1]
    values = g0 * (1.0 - frac) + g1 * frac
    bin_width_log2 = _LOG2_SPAN / (F - 1.0)
    slopes = (g1 - g0) / bin_width_log2
    return values, slopes


def _interp_row(row, freqs):
    F = len(row)
    pos = _grid_positions(freqs, F)
    i0 = np.clip(np.floor(pos).astype(int), 0, F - 2)
    frac = pos - i0
    values = row[i0] * (1.0 - frac) + row[i0 + 1] * frac
    bin_width_log2 = _LOG2_SPAN / (F - 1.0)
    slopes = (row[i0 + 1] - row[i0]) / bin_width_log2
    return values, slopes
