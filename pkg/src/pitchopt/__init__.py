"""pitchopt: pitch, aperiodicity and voicing by optimization through DSP.

The package decomposes speech into f0, spectral envelope and aperiodicity
with a source-filter analysis/synthesis pipeline.  Pitch and aperiodicity
are found per utterance by gradient descent on spectral matching losses:
a waveform-free excitation spectrogram aligns harmonic combs, a
subharmonic-summation prior anchors absolute pitch, and a generalized
energy distance fits the aperiodic balance.
"""

from .audio import (INTERNAL_RATE, PitchLabelTrack, Waveform, load_pitch_labels,
                    load_wav, resample, save_wav, semitone_to_hz)
from .cqt import CqtAnalyzer, CqtMatrix, log_compress, shift_scope
from .estimator import (EstimationResult, PitchEstimator, analyze_features,
                        estimate, initialize)
from .excitation import (PseudoLossContext, assemble_pseudo_spectrogram,
                         phase_matrix, pseudo_loss, pseudo_loss_grad_f0,
                         pseudo_periodic_excitation, triangle_wave)
from .features import (Aperiodicity, BandAperiodicity, PitchTrack,
                       VocoderFeatureSet, VoicingMask)
from .guide import (PitchDistribution, PitchGuide, build_pitch_guide,
                    cqt_shift_to_guide_bins, guide_frequencies, guide_loss,
                    guide_value_at, shifted_guide_loss, shs)
from .losses import (aug_aperiodicity_loss, aug_pitch_loss, augment_waveform,
                     consistency_loss, huber)
from .metrics import (evaluate_all, log_f0_rmse, raw_chroma_accuracy,
                      raw_pitch_accuracy, vuv_error_rate)
from .spectral import (AmplitudeSpectrogram, FineStructureOperator,
                       FineStructureSpectrum, SpectralEnvelope, fine_structure,
                       lag_window_envelope, minimum_phase_response,
                       stft_amplitude)
from .synth import (ReconLossContext, SynthesisResult, bap_to_aperiodicity,
                    detect_voicing, ged_reconstruction_loss,
                    harmonic_excitation, recon_loss_grad_bap, synthesize)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeSpectrogram", "Aperiodicity", "BandAperiodicity", "CqtAnalyzer",
    "CqtMatrix", "EstimationResult", "FineStructureOperator",
    "FineStructureSpectrum", "INTERNAL_RATE", "PitchDistribution",
    "PitchEstimator", "PitchGuide", "PitchLabelTrack", "PitchTrack",
    "PseudoLossContext", "ReconLossContext", "SpectralEnvelope",
    "SynthesisResult", "VocoderFeatureSet", "VoicingMask", "Waveform",
    "analyze_features", "assemble_pseudo_spectrogram", "aug_aperiodicity_loss",
    "aug_pitch_loss", "augment_waveform", "bap_to_aperiodicity",
    "build_pitch_guide", "consistency_loss", "cqt_shift_to_guide_bins",
    "detect_voicing", "estimate", "evaluate_all", "fine_structure",
    "ged_reconstruction_loss", "guide_frequencies", "guide_loss",
    "guide_value_at", "harmonic_excitation", "huber", "initialize",
    "lag_window_envelope", "load_pitch_labels", "load_wav", "log_compress",
    "log_f0_rmse", "minimum_phase_response", "phase_matrix", "pseudo_loss",
    "pseudo_loss_grad_f0", "pseudo_periodic_excitation", "raw_chroma_accuracy",
    "raw_pitch_accuracy", "recon_loss_grad_bap", "resample", "save_wav",
    "semitone_to_hz", "shift_scope", "shifted_guide_loss", "shs",
    "stft_amplitude", "synthesize", "triangle_wave", "vuv_error_rate",
]
