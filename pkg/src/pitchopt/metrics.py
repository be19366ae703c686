"""Pitch and voicing evaluation metrics with frame alignment.

Estimated frames live on a uniform grid (frame t at t * frame_shift);
references carry explicit timestamps.  Frames are paired by nearest
timestamp within half a hop.  Pitch accuracy metrics are computed over
reference-voiced frames only; the V/UV error rate uses all aligned frames.
"""

from __future__ import annotations

import warnings

import numpy as np

from .audio import PitchLabelTrack


def align_frames(est_times, ref_times, tolerance):
    """Pair each reference frame with the nearest estimate within tolerance.

    Returns (est_idx, ref_idx) index arrays of equal length.
    """
    est_times = np.asarray(est_times, dtype=np.float64)
    ref_times = np.asarray(ref_times, dtype=np.float64)
    if len(est_times) == 0 or len(ref_times) == 0:
        return np.array([], dtype=int), np.array([], dtype=int)
    order = np.argsort(est_times)
    sorted_times = est_times[order]
    pos = np.searchsorted(sorted_times, ref_times)
    pos = np.clip(pos, 1, len(sorted_times) - 1)
    left = sorted_times[pos - 1]
    right = sorted_times[pos]
    nearest = np.where(ref_times - left <= right - ref_times, pos - 1, pos)
    # handle references before the first / after the last estimate
    nearest = np.clip(nearest, 0, len(sorted_times) - 1)
    ok = np.abs(sorted_times[nearest] - ref_times) <= tolerance
    ref_idx = np.nonzero(ok)[0]
    return order[nearest[ok]], ref_idx


def _prepare(est_f0, ref: PitchLabelTrack, est_times, frame_shift_s):
    est_f0 = np.asarray(est_f0, dtype=np.float64)
    if est_times is None:
        est_times = np.arange(len(est_f0)) * frame_shift_s
    est_idx, ref_idx = align_frames(est_times, ref.times, frame_shift_s / 2.0)
    return est_f0, est_idx, ref_idx


def _cents_errors(est_f0, ref: PitchLabelTrack, est_times, frame_shift_s):
    est_f0, est_idx, ref_idx = _prepare(est_f0, ref, est_times, frame_shift_s)
    voiced = ref.f0_hz[ref_idx] > 0
    est_v = est_f0[est_idx[voiced]]
    ref_v = ref.f0_hz[ref_idx[voiced]]
    if len(ref_v) == 0:
        warnings.warn("no voiced reference frames; pitch metric undefined",
                      stacklevel=3)
        return None
    if np.any(est_v <= 0):
        # unvoiced estimate on a voiced reference frame: infinite cents error
        cents = np.full(len(ref_v), np.inf)
        ok = est_v > 0
        cents[ok] = 1200.0 * np.log2(est_v[ok] / ref_v[ok])
        return cents
    return 1200.0 * np.log2(est_v / ref_v)


def raw_pitch_accuracy(est_f0, ref: PitchLabelTrack, cents_tol=50.0,
                       est_times=None, frame_shift_s=0.005) -> float:
    """Fraction of reference-voiced frames within ``cents_tol`` cents."""
    cents = _cents_errors(est_f0, ref, est_times, frame_shift_s)
    if cents is None:
        return float("nan")
    return float(np.mean(np.abs(cents) <= cents_tol))


def raw_chroma_accuracy(est_f0, ref: PitchLabelTrack, cents_tol=50.0,
                        est_times=None, frame_shift_s=0.005) -> float:
    """Pitch accuracy that forgives integer-octave errors."""
    cents = _cents_errors(est_f0, ref, est_times, frame_shift_s)
    if cents is None:
        return float("nan")
    finite = np.isfinite(cents)
    chroma = np.where(finite, cents - 1200.0 * np.round(cents / 1200.0), np.inf)
    return float(np.mean(np.abs(chroma) <= cents_tol))


def log_f0_rmse(est_f0, ref: PitchLabelTrack, est_times=None,
                frame_shift_s=0.005) -> float:
    """RMSE of natural-log f0 over reference-voiced frames."""
    est_f0, est_idx, ref_idx = _prepare(est_f0, ref, est_times, frame_shift_s)
    voiced = ref.f0_hz[ref_idx] > 0
    est_v = est_f0[est_idx[voiced]]
    ref_v = ref.f0_hz[ref_idx[voiced]]
    if len(ref_v) == 0:
        warnings.warn("no voiced reference frames; RMSE undefined", stacklevel=2)
        return float("nan")
    if np.any(est_v <= 0):
        raise ValueError("estimated f0 must be positive on voiced frames "
                         "for log RMSE")
    err = np.log(est_v) - np.log(ref_v)
    return float(np.sqrt(np.mean(err ** 2)))


def vuv_error_rate(est_voicing, ref: PitchLabelTrack, est_times=None,
                   frame_shift_s=0.005) -> float:
    """Fraction of aligned frames whose voicing flags disagree."""
    est_voicing = np.asarray(est_voicing, dtype=bool)
    if est_times is None:
        est_times = np.arange(len(est_voicing)) * frame_shift_s
    est_idx, ref_idx = align_frames(est_times, ref.times, frame_shift_s / 2.0)
    if len(ref_idx) == 0:
        raise ValueError("no aligned frames between estimate and reference")
    ref_voiced = ref.f0_hz[ref_idx] > 0
    return float(np.mean(est_voicing[est_idx] != ref_voiced))


def evaluate_all(est_f0, est_voicing, ref: PitchLabelTrack, est_times=None,
                 frame_shift_s=0.005) -> dict:
    """All standard metrics in one pass, keyed for reporting."""
    return {
        "rpa_50": raw_pitch_accuracy(est_f0, ref, 50.0, est_times, frame_shift_s),
        "rpa_100": raw_pitch_accuracy(est_f0, ref, 100.0, est_times, frame_shift_s),
        "rca_50": raw_chroma_accuracy(est_f0, ref, 50.0, est_times, frame_shift_s),
        "rca_100": raw_chroma_accuracy(est_f0, ref, 100.0, est_times, frame_shift_s),
        "log_f0_rmse": log_f0_rmse(est_f0, ref, est_times, frame_shift_s),
        "vuv_error_rate": vuv_error_rate(est_voicing, ref, est_times,
                                         frame_shift_s),
    }
