"""Relative-pitch consistency loss, waveform augmentation, robustness losses."""

from __future__ import annotations

import numpy as np

from .audio import Waveform
from .features import Aperiodicity, PitchTrack
from .validation import check_positive

DEFAULT_HUBER_DELTA = 1.0
DEFAULT_MAX_SNR_DB = -6.0
DEFAULT_GAIN_RANGE_DB = 6.0
SNR_UPPER_DB = 30.0


def huber(x, delta=DEFAULT_HUBER_DELTA):
    """Huber norm: quadratic inside |x| <= delta, linear outside."""
    check_positive(delta, "delta")
    x = np.abs(np.asarray(x, dtype=np.float64))
    return np.where(x <= delta, 0.5 * x ** 2, delta * (x - 0.5 * delta))


def consistency_loss(p: PitchTrack, p_shift: PitchTrack, d_semitones=0.0,
                     delta=DEFAULT_HUBER_DELTA) -> float:
    """Huber penalty on the octave error between a track and its shifted twin.

    A shift of d semitones is d/12 octaves, so a perfectly consistent pair
    satisfies log2(p) - log2(p_shift) + d/12 = 0 per frame.
    """
    if len(p) != len(p_shift):
        raise ValueError("pitch tracks must have equal length")
    err = p.log2_f0 - p_shift.log2_f0 + d_semitones / 12.0
    return float(huber(np.abs(err), delta).mean())


def aug_pitch_loss(p: PitchTrack, p_aug: PitchTrack,
                   delta=DEFAULT_HUBER_DELTA) -> float:
    """Consistency between clean and augmented estimates (zero shift)."""
    return consistency_loss(p, p_aug, 0.0, delta)


def aug_aperiodicity_loss(A_aug: Aperiodicity, A: Aperiodicity) -> float:
    """Mean absolute log-domain aperiodicity mismatch."""
    if A_aug.values.shape != A.values.shape:
        raise ValueError("aperiodicity shapes must match")
    return float(np.abs(np.log(A_aug.values) - np.log(A.values)).mean())


def augment_waveform(w: Waveform, max_snr_db=DEFAULT_MAX_SNR_DB,
                     gain_range_db=DEFAULT_GAIN_RANGE_DB, seed=None) -> Waveform:
    """Add white noise at a random SNR and apply a random gain.

    The SNR is uniform in dB between ``max_snr_db`` (the noisiest allowed
    mix) and +30 dB; gain is uniform in +-gain_range_db.  Deterministic
    under a fixed seed.
    """
    rng = np.random.default_rng(seed)
    snr_db = rng.uniform(max_snr_db, SNR_UPPER_DB)
    gain_db = rng.uniform(-gain_range_db, gain_range_db)
    rms = np.sqrt(np.mean(w.samples ** 2))
    noise = rng.standard_normal(len(w.samples))
    if rms > 0:
        noise_rms = np.sqrt(np.mean(noise ** 2))
        noise *= rms * 10.0 ** (-snr_db / 20.0) / noise_rms
    else:
        noise[:] = 0.0
    gain = 10.0 ** (gain_db / 20.0)
    return Waveform((w.samples + noise) * gain, w.sample_rate)
