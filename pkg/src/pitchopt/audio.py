"""Waveform and pitch-label I/O, resampling, and the base time-domain types.

Everything downstream runs at a fixed internal rate of 24 kHz; loaders accept
other rates and callers resample explicitly.  Unvoiced frames in label files
are encoded as f0 = 0, the convention used by common DSP pitch trackers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.signal
from scipy.io import wavfile

from .validation import as_float_array, check_positive

INTERNAL_RATE = 24000

F0_MIN = 20.0
F0_MAX = 2000.0


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1] at a given sampling rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = as_float_array(self.samples, "samples", ndim=1)
        self.sample_rate = int(check_positive(self.sample_rate, "sample_rate"))

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class PitchLabelTrack:
    """Reference pitch annotations: times in seconds, f0 in Hz (0 = unvoiced)."""

    times: np.ndarray
    f0_hz: np.ndarray

    def __post_init__(self):
        self.times = as_float_array(self.times, "times", ndim=1)
        self.f0_hz = as_float_array(self.f0_hz, "f0_hz", ndim=1)
        if self.times.shape != self.f0_hz.shape:
            raise ValueError("times and f0_hz must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("label times must be strictly increasing")
        voiced = self.f0_hz > 0
        bad = voiced & ((self.f0_hz < F0_MIN) | (self.f0_hz > F0_MAX))
        if np.any(bad):
            raise ValueError(
                f"voiced f0 labels must lie in [{F0_MIN}, {F0_MAX}] Hz; "
                f"first offender {self.f0_hz[bad][0]:.2f} Hz"
            )

    @property
    def voicing(self) -> np.ndarray:
        return self.f0_hz > 0


def semitone_to_hz(semitones):
    """MIDI-style semitone to Hz (A4 = 69 = 440 Hz).  Zeros stay zero."""
    st = np.asarray(semitones, dtype=np.float64)
    hz = 440.0 * np.exp2((st - 69.0) / 12.0)
    return np.where(st == 0, 0.0, hz)


def load_wav(path, channel="mix") -> Waveform:
    """Read a RIFF WAV file (PCM16/PCM32/float32/float64) as a mono Waveform.

    Parameters
    ----------
    path : file path
    channel : "mix" | "left" | "right" | int
        Stereo handling.  "mix" averages channels; an index selects one.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot read WAV file {path!r}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype} in {path!r}")

    if samples.ndim == 2:
        if channel == "mix":
            samples = samples.mean(axis=1)
        elif channel == "left":
            samples = samples[:, 0]
        elif channel == "right":
            samples = samples[:, min(1, samples.shape[1] - 1)]
        else:
            samples = samples[:, int(channel)]
    return Waveform(samples, rate)


def save_wav(path, w: Waveform, subtype="float32") -> None:
    """Write a Waveform to disk; float32 storage round-trips bit-exactly."""
    if subtype == "float32":
        wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))
    elif subtype == "pcm16":
        clipped = np.clip(w.samples, -1.0, 1.0)
        wavfile.write(path, w.sample_rate, np.round(clipped * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported subtype {subtype!r}")


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Band-limited polyphase resampling; duration preserved within a sample."""
    target_rate = int(check_positive(target_rate, "target_rate"))
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    ratio = Fraction(target_rate, w.sample_rate)
    out = scipy.signal.resample_poly(
        w.samples, ratio.numerator, ratio.denominator,
        window=("kaiser", 14.0), padtype="line",
    )
    expected = int(math.ceil(len(w.samples) * ratio))
    if len(out) > expected:
        out = out[:expected]
    return Waveform(out, target_rate)


def load_pitch_labels(path, frame_shift_s=0.005, units="hz") -> PitchLabelTrack:
    """Parse a pitch label file.

    Two whitespace-separated columns are read as "time_sec f0"; a single
    column is read as one value per frame, with frame i at i*frame_shift_s.
    ``units`` selects "hz" or "semitone" for the f0 values; zeros always mean
    unvoiced.
    """
    if units not in ("hz", "semitone"):
        raise ValueError(f"units must be 'hz' or 'semitone', got {units!r}")
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (1, 2):
                raise ValueError(f"{path}:{lineno}: expected 1 or 2 columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from exc
    if not rows:
        raise ValueError(f"{path}: no label rows")
    ncol = len(rows[0])
    if any(len(r) != ncol for r in rows):
        raise ValueError(f"{path}: inconsistent column count")
    if ncol == 2:
        times = np.array([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
    else:
        values = np.array([r[0] for r in rows])
        times = np.arange(len(values)) * float(frame_shift_s)
    if units == "semitone":
        values = semitone_to_hz(values)
    return PitchLabelTrack(times, values)
