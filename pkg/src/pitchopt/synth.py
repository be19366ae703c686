"""Source-filter synthesis, band-aperiodicity expansion, GED loss, voicing.

The synthesizer renders a periodic branch (summed harmonics of the f0
track) and an aperiodic branch (white noise), each filtered frame-by-frame
with minimum-phase responses of the envelope weighted by (1 - A) and A
respectively, and overlap-adds them into a waveform.

For aperiodicity optimization the loss operates on the frequency-domain
mixture of fixed excitation spectrograms: that keeps the forward loss an
explicit elementwise function of the band values, so its gradient is exact
while the excitations and filters are recomputed between optimizer steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .audio import Waveform
from .features import Aperiodicity, BandAperiodicity, PitchTrack, VoicingMask
from .spectral import (AmplitudeSpectrogram, FineStructureOperator,
                       SpectralEnvelope, default_operator,
                       minimum_phase_impulse_response, stft_amplitude)
from .validation import check_positive, check_same_shape

APERIODICITY_ANCHORS_HZ = (0.0, 375.0, 750.0, 1500.0, 3000.0,
                           6000.0, 9000.0, 12000.0)
DEFAULT_GED_ALPHA = 0.1
DEFAULT_VOICING_THRESHOLD = 0.5


def bap_interp_weights(n_bins, sample_rate=24000,
                       anchors_hz=APERIODICITY_ANCHORS_HZ) -> np.ndarray:
    """K x b matrix expanding band values to bins: log A = log B @ W.T.

    Piecewise-linear in linear frequency between anchor points, constant
    beyond the outermost anchors; each row holds at most two nonzero
    weights summing to 1.
    """
    anchors = np.asarray(anchors_hz, dtype=np.float64)
    if np.any(np.diff(anchors) <= 0):
        raise ValueError("anchor frequencies must be strictly increasing")
    K = int(n_bins)
    freqs = (np.arange(K) + 1.0) * sample_rate / (2.0 * K)
    b = len(anchors)
    W = np.zeros((K, b))
    seg = np.clip(np.searchsorted(anchors, freqs, side="right") - 1, 0, b - 2)
    left = anchors[seg]
    right = anchors[seg + 1]
    frac = np.clip((freqs - left) / (right - left), 0.0, 1.0)
    W[np.arange(K), seg] = 1.0 - frac
    W[np.arange(K), seg + 1] += frac
    return W


def bap_to_aperiodicity(B: BandAperiodicity, n_bins, sample_rate=24000,
                        anchors_hz=APERIODICITY_ANCHORS_HZ) -> Aperiodicity:
    """Expand band aperiodicity to per-bin values.

    Interpolation is linear in log amplitude over linear frequency, i.e.
    geometric between anchors, so values stay inside the band range.
    """
    W = bap_interp_weights(n_bins, sample_rate, anchors_hz)
    log_a = np.log(B.values) @ W.T
    return Aperiodicity(np.exp(log_a))


def harmonic_excitation(p: PitchTrack, sample_rate=24000, hop=120,
                        n_samples=None) -> Waveform:
    """Sum of phase-coherent harmonic sines following the f0 track.

    Frame values are linearly interpolated to a per-sample f0 curve; each
    harmonic h contributes sin(h * phase) while h * f0 stays below Nyquist,
    and the sum is scaled by 1/sqrt(active harmonic count) per sample.
    """
    check_positive(sample_rate, "sample_rate")
    check_positive(hop, "hop")
    T = len(p)
    if n_samples is None:
        # (T-1)*hop samples analyze back to exactly T centered frames
        n_samples = (T - 1) * hop if T > 1 else hop
    frame_pos = np.arange(T) * hop
    f0 = np.interp(np.arange(n_samples), frame_pos, p.f0_hz)
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    nyquist = sample_rate / 2.0
    max_h = int(np.floor(nyquist / f0.min()))
    if max_h * f0.min() >= nyquist:
        max_h -= 1
    h = np.arange(1, max_h + 1)
    active = h[:, None] * f0[None, :] < nyquist
    bank = np.sin(h[:, None] * phase[None, :])
    counts = active.sum(axis=0)
    signal = (bank * active).sum(axis=0) / np.sqrt(np.maximum(counts, 1))
    return Waveform(signal, sample_rate)


@dataclass
class SynthesisResult:
    waveform: Waveform
    periodic_spec: AmplitudeSpectrogram
    aperiodic_spec: AmplitudeSpectrogram


def synthesize(p: PitchTrack, envelope: SpectralEnvelope, A: Aperiodicity,
               seed=None, sample_rate=24000, frame_shift_s=0.005,
               normalize=True) -> SynthesisResult:
    """Render a waveform from vocoder features; returns both branch STFTs.

    The periodic branch filters the harmonic excitation with the
    minimum-phase response of H * (1 - A); the aperiodic branch filters
    white noise with that of H * A.  Equal seeds reproduce bit-identically,
    and the seed only affects the aperiodic branch.
    """
    T, K = envelope.log_values.shape
    check_same_shape(envelope.log_values, A.values, "envelope", "aperiodicity")
    if len(p) != T:
        raise ValueError("pitch track length must match the envelope")
    hop = int(round(frame_shift_s * sample_rate))
    n_samples = (T - 1) * hop if T > 1 else hop

    e_p = harmonic_excitation(p, sample_rate, hop, n_samples).samples
    e_ap = np.random.default_rng(seed).standard_normal(n_samples)

    log_h = envelope.log_values
    periodic = _filter_frames(e_p, log_h + np.log1p(-A.values), hop)
    aperiodic = _filter_frames(e_ap, log_h + np.log(A.values), hop)
    total = periodic + aperiodic
    if normalize:
        peak = np.abs(total).max()
        if peak > 0.99:
            scale = 0.99 / peak
            periodic = periodic * scale
            aperiodic = aperiodic * scale
            total = total * scale
    wav = Waveform(total, sample_rate)
    p_spec = stft_amplitude(Waveform(periodic, sample_rate), 2 * K, frame_shift_s)
    ap_spec = stft_amplitude(Waveform(aperiodic, sample_rate), 2 * K, frame_shift_s)
    return SynthesisResult(wav, p_spec, ap_spec)


def _filter_frames(excitation, log_magnitude, hop):
    """Per-frame minimum-phase filtering with 50% overlap-add Hann grains."""
    T, K = log_magnitude.shape
    n = len(excitation)
    ir = minimum_phase_impulse_response(log_magnitude)  # (T, 2K)
    grain_len = 2 * hop
    window = scipy.signal.get_window("hann", grain_len, fftbins=True)
    n_fft = int(2 ** np.ceil(np.log2(grain_len + 2 * K - 1)))
    padded = np.concatenate([np.zeros(hop), excitation, np.zeros(grain_len)])
    starts = np.arange(T) * hop
    grains = padded[starts[:, None] + np.arange(grain_len)[None, :]] * window
    spec = np.fft.rfft(grains, n=n_fft, axis=1) * np.fft.rfft(ir, n=n_fft, axis=1)
    filtered = np.fft.irfft(spec, n=n_fft, axis=1)
    out = np.zeros(n + grain_len + n_fft)
    for t in range(T):
        out[starts[t]:starts[t] + n_fft] += filtered[t]
    # grains were gathered starting hop samples early; realign
    return out[hop:hop + n]


def ged_reconstruction_loss(S_tilde_1: AmplitudeSpectrogram,
                            S_tilde_2: AmplitudeSpectrogram,
                            S: AmplitudeSpectrogram,
                            alpha=DEFAULT_GED_ALPHA,
                            op: FineStructureOperator | None = None) -> float:
    """Generalized energy distance on fine structure.

    L = mean|psi(S1) - psi(S)| - alpha * mean|psi(S1) - psi(S2)|; the
    repulsive second term rewards keeping the two stochastic renderings
    apart, which stops the noise branch from collapsing onto the target.
    """
    check_same_shape(S_tilde_1.values, S.values, "S_tilde_1", "target")
    check_same_shape(S_tilde_2.values, S.values, "S_tilde_2", "target")
    if op is None:
        op = default_operator(S)
    psi_1 = op.psi(S_tilde_1.values)
    psi_2 = op.psi(S_tilde_2.values)
    psi_t = op.psi(S.values)
    attract = np.abs(psi_1 - psi_t).mean()
    repulse = np.abs(psi_1 - psi_2).mean()
    return float(attract - alpha * repulse)


class ReconLossContext:
    """Fixed excitation spectrograms and target for one BAP gradient step.

    The periodic excitation spectrogram and the two independent noise
    spectrograms are held constant; the loss is then an explicit function
    of the band logits through the geometric interpolation and the
    two-branch mix, so forward and gradient agree to machine precision.
    """

    def __init__(self, periodic_spec: AmplitudeSpectrogram,
                 noise_spec_1: AmplitudeSpectrogram,
                 noise_spec_2: AmplitudeSpectrogram,
                 envelope: SpectralEnvelope, S: AmplitudeSpectrogram,
                 alpha=DEFAULT_GED_ALPHA,
                 anchors_hz=APERIODICITY_ANCHORS_HZ,
                 op: FineStructureOperator | None = None, target_psi=None,
                 weights=None):
        self.op = default_operator(S) if op is None else op
        self.E_p = periodic_spec.values
        self.N1 = noise_spec_1.values
        self.N2 = noise_spec_2.values
        self.H = envelope.amplitude
        self.target_psi = self.op.psi(S.values) if target_psi is None else target_psi
        self.alpha = float(alpha)
        self.W = (bap_interp_weights(S.n_bins, S.sample_rate, anchors_hz)
                  if weights is None else weights)

    def _expand(self, B: BandAperiodicity):
        return np.exp(np.log(B.values) @ self.W.T)

    def _mix(self, A):
        p_branch = self.E_p * self.H * (1.0 - A)
        n1 = self.N1 * self.H * A
        n2 = self.N2 * self.H * A
        return p_branch + n1, p_branch + n2

    def loss_per_frame(self, B: BandAperiodicity) -> np.ndarray:
        A = self._expand(B)
        s1, s2 = self._mix(A)
        psi_1 = self.op.psi(s1)
        psi_2 = self.op.psi(s2)
        attract = np.abs(psi_1 - self.target_psi).mean(axis=1)
        repulse = np.abs(psi_1 - psi_2).mean(axis=1)
        return attract - self.alpha * repulse

    def loss(self, B: BandAperiodicity) -> float:
        return float(self.loss_per_frame(B).mean())

    def loss_and_grad(self, B: BandAperiodicity):
        """GED loss plus its gradient with respect to the band logits."""
        T, K = self.target_psi.shape
        A = self._expand(B)
        s1, s2 = self._mix(A)
        psi_1 = self.op.psi(s1)
        psi_2 = self.op.psi(s2)
        d_target = psi_1 - self.target_psi
        d_pair = psi_1 - psi_2
        loss = float(np.abs(d_target).mean() - self.alpha * np.abs(d_pair).mean())

        scale = 1.0 / (T * K)
        g_psi1 = (np.sign(d_target) - self.alpha * np.sign(d_pair)) * scale
        g_psi2 = self.alpha * np.sign(d_pair) * scale
        g_s1 = self.op.psi_backward(g_psi1, s1)
        g_s2 = self.op.psi_backward(g_psi2, s2)
        g_A = g_s1 * self.H * (self.N1 - self.E_p) \
            + g_s2 * self.H * (self.N2 - self.E_p)
        g_logit = ((g_A * A) @ self.W) * (1.0 - B.values)
        return loss, g_logit


def recon_loss_grad_bap(B: BandAperiodicity,
                        context: ReconLossContext) -> np.ndarray:
    """Gradient of the GED reconstruction loss in band-logit space."""
    _, grad = context.loss_and_grad(B)
    return grad


def detect_voicing(envelope: SpectralEnvelope, A: Aperiodicity,
                   theta=DEFAULT_VOICING_THRESHOLD) -> VoicingMask:
    """Classify frames by their periodic share of envelope-weighted energy.

    v' = sum(H * (1 - A)) / sum(H) per frame; a frame is voiced when
    v' >= theta (ties count as voiced).  Frames with zero envelope mass get
    v' = 0 and are unvoiced.
    """
    H = envelope.amplitude
    check_same_shape(H, A.values, "envelope", "aperiodicity")
    m_p = np.sum(H * (1.0 - A.values), axis=1)
    m_ap = np.sum(H * A.values, axis=1)
    total = m_p + m_ap
    degenerate = total <= 0
    if np.any(degenerate):
        warnings.warn("frames with zero envelope mass marked unvoiced",
                      stacklevel=2)
    soft = np.where(degenerate, 0.0, m_p / np.where(degenerate, 1.0, total))
    return VoicingMask(soft >= theta, soft)


__all__ = [
    "APERIODICITY_ANCHORS_HZ", "DEFAULT_GED_ALPHA",
    "DEFAULT_VOICING_THRESHOLD", "SynthesisResult", "ReconLossContext",
    "assemble_pseudo_spectrogram", "bap_interp_weights",
    "bap_to_aperiodicity", "detect_voicing", "ged_reconstruction_loss",
    "harmonic_excitation", "recon_loss_grad_bap", "synthesize",
]
