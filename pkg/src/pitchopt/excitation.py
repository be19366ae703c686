"""Waveform-free periodic excitation spectrograms and the f0 matching loss.

A frame's harmonic comb is rendered directly in the frequency domain: the
number of f0 cycles that fit below each bin frequency defines a phase ramp,
a triangle wave of that phase peaks at exact harmonics, and squaring its
positive part yields a comb-shaped excitation spectrum without ever
synthesizing a waveform.  Because every step is an explicit elementwise
formula, the derivative of the resulting spectral loss with respect to each
frame's f0 is available in closed form, with per-frame independence (no
cross-frame terms anywhere in the chain).
"""

from __future__ import annotations

import warnings

import numpy as np

from .features import Aperiodicity, PitchTrack, VoicingMask
from .spectral import (AmplitudeSpectrogram, FineStructureOperator,
                       SpectralEnvelope, default_operator)
from .validation import check_positive, check_same_shape

DEFAULT_EXCITATION_EPS = 0.001
LN2 = np.log(2.0)


def phase_matrix(p: PitchTrack, sample_rate=24000, n_bins=1024) -> np.ndarray:
    """Phase ramp Phi[t, k] = fs * k / (2 * p_t * K) for bins k = 1..K.

    Phi counts f0 periods below each bin frequency; its value at the Nyquist
    column equals the number of harmonics below Nyquist.
    """
    check_positive(sample_rate, "sample_rate")
    check_positive(n_bins, "n_bins")
    k = np.arange(1, n_bins + 1, dtype=np.float64)
    return (sample_rate / (2.0 * n_bins)) * k[None, :] / p.f0_hz[:, None]


def triangle_wave(phi) -> np.ndarray:
    """Triangle wave of the phase ramp: peaks +1 at integer phase, -1 between.

    Below phase 0.5 (under the first harmonic) the output is pinned at -1.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(phi < 0):
        raise ValueError("phase values must be nonnegative")
    tri = 4.0 * np.abs(phi - np.floor(phi) - 0.5) - 1.0
    return np.where(phi < 0.5, -1.0, tri)


def pseudo_periodic_excitation(p: PitchTrack, eps=DEFAULT_EXCITATION_EPS,
                               seed=None, noise=None, sample_rate=24000,
                               n_bins=1024,
                               frame_shift_s=0.005) -> AmplitudeSpectrogram:
    """Comb excitation spectrogram max(X, eps)^2 + |Z * eps| built from f0.

    ``noise`` supplies the standard-normal matrix Z directly (the optimizer
    reuses one draw for a forward/backward pair); otherwise it is drawn from
    ``seed``.  Deterministic given either.
    """
    phi = phase_matrix(p, sample_rate, n_bins)
    tri = triangle_wave(phi)
    if noise is None:
        noise = np.random.default_rng(seed).standard_normal(tri.shape)
    check_same_shape(tri, noise, "triangle wave", "noise")
    values = np.maximum(tri, eps) ** 2 + np.abs(noise * eps)
    return AmplitudeSpectrogram(values, frame_shift_s, sample_rate)


def assemble_pseudo_spectrogram(excitation: AmplitudeSpectrogram,
                                envelope: SpectralEnvelope,
                                aperiodicity: Aperiodicity,
                                aperiodic_spec: AmplitudeSpectrogram
                                ) -> AmplitudeSpectrogram:
    """Mix periodic excitation and an aperiodic excitation spectrogram.

    S = E * H * (1 - A) + N * H * A, elementwise, with H the amplitude
    envelope and N the spectrogram of the aperiodic excitation.
    """
    H = envelope.amplitude
    A = aperiodicity.values
    check_same_shape(excitation.values, H, "excitation", "envelope")
    check_same_shape(excitation.values, A, "excitation", "aperiodicity")
    check_same_shape(excitation.values, aperiodic_spec.values,
                     "excitation", "aperiodic_spec")
    mixed = excitation.values * H * (1.0 - A) + aperiodic_spec.values * H * A
    return AmplitudeSpectrogram(mixed, excitation.frame_shift_s,
                                excitation.sample_rate)


def pseudo_loss(S_star: AmplitudeSpectrogram, S: AmplitudeSpectrogram,
                voicing: VoicingMask,
                op: FineStructureOperator | None = None) -> float:
    """Mean absolute fine-structure mismatch over voiced frames.

    Unvoiced frames are masked out entirely; with no voiced frames the loss
    is 0 by convention (a warning is emitted since nothing was compared).
    """
    check_same_shape(S_star.values, S.values, "pseudo spectrogram", "target")
    if op is None:
        op = default_operator(S)
    mask = np.asarray(voicing.flags, dtype=bool)
    if mask.shape != (S.values.shape[0],):
        raise ValueError("voicing mask length must match frame count")
    if not np.any(mask):
        warnings.warn("no voiced frames; pseudo loss is 0 by convention",
                      stacklevel=2)
        return 0.0
    diff = op.psi(S_star.values[mask]) - op.psi(S.values[mask])
    return float(np.abs(diff).mean())


class PseudoLossContext:
    """Fixed ingredients for one forward/backward pseudo-loss evaluation.

    Everything except the pitch track is treated as constant: the target
    fine structure, the amplitude envelope, the aperiodicity, the aperiodic
    mix term, the voicing mask and one noise draw.  Reusing a context keeps
    the noise identical between a forward pass and its gradient, and between
    the two sides of a finite difference.
    """

    def __init__(self, S: AmplitudeSpectrogram, envelope: SpectralEnvelope,
                 aperiodicity: Aperiodicity,
                 aperiodic_spec: AmplitudeSpectrogram, voicing: VoicingMask,
                 eps=DEFAULT_EXCITATION_EPS, seed=None, noise=None,
                 op: FineStructureOperator | None = None, target_psi=None):
        self.op = default_operator(S) if op is None else op
        self.sample_rate = S.sample_rate
        self.frame_shift_s = S.frame_shift_s
        self.n_bins = S.n_bins
        self.target_psi = self.op.psi(S.values) if target_psi is None else target_psi
        self.H = envelope.amplitude
        self.A = aperiodicity.values
        self.aperiodic_term = aperiodic_spec.values * self.H * self.A
        self.mask = np.asarray(voicing.flags, dtype=bool)
        self.eps = float(eps)
        if noise is None:
            noise = np.random.default_rng(seed).standard_normal(
                self.target_psi.shape)
        self.noise = noise
        # constant weight of the periodic branch in the mix
        self.periodic_gain = self.H * (1.0 - self.A)

    @property
    def n_voiced(self) -> int:
        return int(self.mask.sum())

    def loss_per_frame(self, p: PitchTrack) -> np.ndarray:
        """Per-frame mean |psi(S*) - psi(S)| (zero on unvoiced frames)."""
        s_star = self._forward(p)
        diff = self.op.psi(s_star) - self.target_psi
        per_frame = np.abs(diff).mean(axis=1)
        return np.where(self.mask, per_frame, 0.0)

    def loss(self, p: PitchTrack) -> float:
        if self.n_voiced == 0:
            return 0.0
        return float(self.loss_per_frame(p)[self.mask].mean())

    def _forward(self, p: PitchTrack):
        phi = phase_matrix(p, self.sample_rate, self.n_bins)
        tri = triangle_wave(phi)
        exc = np.maximum(tri, self.eps) ** 2 + np.abs(self.noise * self.eps)
        return exc * self.periodic_gain + self.aperiodic_term

    def loss_and_grad(self, p: PitchTrack):
        """Loss, its exact derivative with respect to log2 f0, and the raw
        per-frame residuals (unmasked, useful as comb-fit evidence).

        Chain: dPhi/dlog2p = -Phi*ln2; triangle slope +-4 away from its
        kinks (subgradient 0 at the kinks and in the pinned region); the
        squared max gates bins below eps; the mix, log and lag-window lifter
        are linear, handled by the lifter's adjoint; the L1 sign closes the
        chain.  Frames are independent throughout.
        """
        T = len(p)
        phi = phase_matrix(p, self.sample_rate, self.n_bins)
        tri = triangle_wave(phi)
        exc = np.maximum(tri, self.eps) ** 2 + np.abs(self.noise * self.eps)
        s_star = exc * self.periodic_gain + self.aperiodic_term

        psi_star = self.op.psi(s_star)
        diff = psi_star - self.target_psi
        residuals = np.abs(diff).mean(axis=1)
        if self.n_voiced == 0:
            return 0.0, np.zeros(T), residuals
        n_voiced = self.n_voiced
        K = self.n_bins
        loss = float(residuals[self.mask].mean())

        g_psi = np.sign(diff) * self.mask[:, None] / (n_voiced * K)
        g_s = self.op.psi_backward(g_psi, s_star)
        g_exc = g_s * self.periodic_gain
        g_tri = g_exc * 2.0 * np.maximum(tri, self.eps) * (tri > self.eps)
        frac = phi - np.floor(phi)
        tri_slope = 4.0 * np.sign(frac - 0.5)
        tri_slope[(phi < 0.5) | (frac == 0.5) | (frac == 0.0)] = 0.0
        g_phi = g_tri * tri_slope
        grad_log2p = np.sum(g_phi * (-phi * LN2), axis=1)
        return loss, grad_log2p, residuals


def pseudo_loss_grad_f0(p: PitchTrack, context: PseudoLossContext) -> np.ndarray:
    """Gradient of the pseudo loss with respect to log2 f0, one value per frame."""
    _, grad, _ = context.loss_and_grad(p)
    return grad
