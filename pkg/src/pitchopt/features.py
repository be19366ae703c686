"""Frame-level feature types shared by the analysis and synthesis code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import F0_MAX, F0_MIN
from .spectral import SpectralEnvelope
from .validation import as_float_array

BAP_CLAMP = 1e-4


@dataclass
class PitchTrack:
    """Per-frame fundamental frequency in Hz, strictly positive."""

    f0_hz: np.ndarray

    def __post_init__(self):
        self.f0_hz = as_float_array(self.f0_hz, "f0_hz", ndim=1)
        if np.any(self.f0_hz <= 0):
            raise ValueError("PitchTrack values must be strictly positive")

    @property
    def log2_f0(self) -> np.ndarray:
        return np.log2(self.f0_hz)

    @classmethod
    def from_log2(cls, log2_f0) -> "PitchTrack":
        return cls(np.exp2(np.asarray(log2_f0, dtype=np.float64)))

    def clamped(self, lo=F0_MIN, hi=F0_MAX) -> "PitchTrack":
        return PitchTrack(np.clip(self.f0_hz, lo, hi))

    def __len__(self) -> int:
        return len(self.f0_hz)


@dataclass
class BandAperiodicity:
    """T x b band aperiodicity values, clamped inside (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        vals = as_float_array(self.values, "band aperiodicity", ndim=2)
        self.values = np.clip(vals, BAP_CLAMP, 1.0 - BAP_CLAMP)

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]


@dataclass
class Aperiodicity:
    """T x K per-bin aperiodic energy ratio in (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        vals = as_float_array(self.values, "aperiodicity", ndim=2)
        if np.any(vals <= 0) or np.any(vals >= 1):
            raise ValueError("aperiodicity must lie strictly inside (0, 1)")
        self.values = vals


@dataclass
class VoicingMask:
    """Hard per-frame voicing flags with the soft periodic-energy ratio."""

    flags: np.ndarray
    soft_ratio: np.ndarray

    def __post_init__(self):
        self.soft_ratio = as_float_array(self.soft_ratio, "soft_ratio", ndim=1)
        self.flags = np.asarray(self.flags, dtype=bool)
        if self.flags.shape != self.soft_ratio.shape:
            raise ValueError("flags and soft_ratio must have equal length")

    def __len__(self) -> int:
        return len(self.flags)


@dataclass
class VocoderFeatureSet:
    """Complete analysis output: pitch, envelope, aperiodicity, voicing."""

    pitch: PitchTrack
    envelope: SpectralEnvelope
    aperiodicity: Aperiodicity
    voicing: VoicingMask
    band_aperiodicity: BandAperiodicity
    frame_shift_s: float = 0.005
    sample_rate: int = 24000

    @property
    def n_frames(self) -> int:
        return len(self.pitch)

    def f0_with_unvoiced_zeros(self) -> np.ndarray:
        """F0 track with unvoiced frames zeroed (label-file convention)."""
        return np.where(self.voicing.flags, self.pitch.f0_hz, 0.0)
