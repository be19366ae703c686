"""Deterministic synthetic-signal generators and gradient-check oracles.

These exist to give tests an analytic ground truth.  The vowel generator
deliberately uses its own oscillator and filter (scipy lfilter resonators)
rather than the package's synthesizer, so round-trip and accuracy tests
compare two independent implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .audio import PitchLabelTrack, Waveform

DEFAULT_FORMANTS = ((700.0, 130.0, 1.0), (1220.0, 70.0, 0.7),
                    (2600.0, 160.0, 0.4))


@dataclass
class VowelFixture:
    waveform: Waveform
    labels: PitchLabelTrack
    f0_per_sample: np.ndarray

    @property
    def frame_f0(self) -> np.ndarray:
        return self.labels.f0_hz

    @property
    def frame_voicing(self) -> np.ndarray:
        return self.labels.f0_hz > 0


def make_vowel(f0_hz, duration=1.0, sample_rate=24000,
               formants=DEFAULT_FORMANTS, noise_floor=0.0, seed=0,
               frame_shift_s=0.005, peak=0.4) -> VowelFixture:
    """Synthetic vowel with exact per-frame f0/voicing labels.

    ``f0_hz`` is a scalar, a per-sample array, or a callable t -> Hz; zero
    values mark unvoiced regions, rendered as white noise through the same
    formant filter.  The harmonic source sums equal-amplitude phase-locked
    sines below Nyquist (a flat excitation, so the formant filter is the
    whole spectral envelope).
    """
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    if callable(f0_hz):
        f0 = np.asarray([float(f0_hz(x)) for x in t])
    else:
        f0 = np.broadcast_to(np.asarray(f0_hz, dtype=np.float64), (n,)).copy()
    if np.any(f0 < 0) or np.any(f0[f0 > 0] < 50.0) or np.any(f0 > 800.0):
        raise ValueError("voiced f0 must lie in [50, 800] Hz")

    # pre-roll keeps the source and resonators in steady state at t = 0,
    # so labels describe the analyzed segment from the first frame on
    pre = int(round(0.1 * sample_rate))
    f0 = np.concatenate([np.full(pre, f0[0]), f0])
    n_total = n + pre

    rng = np.random.default_rng(seed)
    voiced = f0 > 0
    source = np.zeros(n_total)
    if np.any(voiced):
        f0_safe = np.where(voiced, f0, np.nan)
        phase = 2.0 * np.pi * np.cumsum(np.where(voiced, f0, 0.0)) / sample_rate
        max_h = int(np.floor(sample_rate / 2.0 / np.nanmin(f0_safe)))
        for h in range(1, max_h + 1):
            audible = voiced & (h * f0 < sample_rate / 2.0)
            if not np.any(audible):
                break
            source[audible] += np.sin(h * phase[audible])
        # keep the source at comparable level regardless of harmonic count
        source[voiced] /= np.sqrt(np.maximum(
            np.floor(sample_rate / 2.0 / np.where(voiced, f0, 1.0)), 1.0))[voiced]
    source[~voiced] = rng.standard_normal(int(np.sum(~voiced)))
    if noise_floor > 0:
        source += noise_floor * rng.standard_normal(n_total)

    out = source
    for fc, bw, gain in formants:
        r = np.exp(-np.pi * bw / sample_rate)
        theta = 2.0 * np.pi * fc / sample_rate
        a = [1.0, -2.0 * r * np.cos(theta), r ** 2]
        out = scipy.signal.lfilter([gain * (1 - r)], a, out)
    out = out[pre:]
    f0 = f0[pre:]
    top = np.abs(out).max()
    if top > 0:
        out = out * (peak / top)

    hop = int(round(frame_shift_s * sample_rate))
    n_frames = n // hop + 1
    centers = np.minimum(np.arange(n_frames) * hop, n - 1)
    labels = PitchLabelTrack(np.arange(n_frames) * frame_shift_s, f0[centers])
    return VowelFixture(Waveform(out, sample_rate), labels, f0)


def vibrato_contour(center_hz, depth_semitones=2.0, rate_hz=5.0):
    """Callable f0 contour: sinusoidal vibrato in log2 frequency."""
    def contour(t):
        return center_hz * 2.0 ** (depth_semitones / 12.0
                                   * np.sin(2.0 * np.pi * rate_hz * t))
    return contour


def finite_difference_oracle(loss_fn, params, step=1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar loss, one coordinate at a time.

    ``loss_fn`` must be deterministic (fix all seeds/noise before calling).
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    flat = params.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        hi = loss_fn(params)
        flat[i] = saved - step
        lo = loss_fn(params)
        flat[i] = saved
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def finite_difference_frames(loss_per_frame_fn, params, step=1e-4) -> np.ndarray:
    """Central differences for losses that decompose per frame.

    ``loss_per_frame_fn(params) -> (T,)`` must have contribution t depend
    only on params[t] (or row t).  All frames are perturbed simultaneously,
    so the full gradient costs two evaluations per column instead of two
    per entry.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.ndim == 1:
        hi = loss_per_frame_fn(params + step)
        lo = loss_per_frame_fn(params - step)
        return (hi - lo) / (2.0 * step)
    grad = np.zeros_like(params)
    for col in range(params.shape[1]):
        bumped = params.copy()
        bumped[:, col] += step
        hi = loss_per_frame_fn(bumped)
        bumped[:, col] -= 2.0 * step
        lo = loss_per_frame_fn(bumped)
        grad[:, col] = (hi - lo) / (2.0 * step)
    return grad
