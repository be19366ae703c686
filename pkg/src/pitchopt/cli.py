"""Command-line interface: analyze, synth, guide, eval, pseudo-demo.

Configuration flows from defaults, then an optional key=value config file,
then command-line flags (flags win).  Exit codes: 0 success, 1 usage
error, 2 data/processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import container, metrics
from .audio import (INTERNAL_RATE, Waveform, load_pitch_labels, load_wav,
                    resample, save_wav)
from .estimator import PitchEstimator
from .excitation import PseudoLossContext, pseudo_periodic_excitation
from .features import PitchTrack
from .guide import build_pitch_guide
from .spectral import stft_amplitude
from .synth import synthesize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

CONFIG_KEYS = {
    "seed": int,
    "steps": int,
    "hop_ms": float,
    "fft_size": int,
    "theta": float,
    "m": float,
    "alpha": float,
    "eps": float,
    "w_pseudo": float,
    "w_g": float,
    "w_recon": float,
    "w_tv": float,
}


def _add_common(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--hop-ms", dest="hop_ms", type=float, default=None)
    parser.add_argument("--fft-size", dest="fft_size", type=int, default=None)
    parser.add_argument("--theta", type=float, default=None,
                        help="voicing threshold")
    parser.add_argument("--m", type=float, default=None, help="guide hinge margin")
    parser.add_argument("--alpha", type=float, default=None,
                        help="GED repulsive weight")
    parser.add_argument("--eps", type=float, default=None,
                        help="excitation floor")
    parser.add_argument("--weights", default=None,
                        help="w_pseudo,w_g,w_recon,w_tv")


def _load_config_file(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = CONFIG_KEYS[key](raw.strip())
    return values


def _resolve_settings(args):
    """Defaults <- config file <- flags."""
    settings = {
        "seed": 0, "steps": 200, "hop_ms": 5.0, "fft_size": 2048,
        "theta": 0.5, "m": 0.5, "alpha": 0.1, "eps": 0.001,
        "w_pseudo": 10.0, "w_g": 1.0, "w_recon": 5.0, "w_tv": 0.1,
    }
    if getattr(args, "config", None):
        settings.update(_load_config_file(args.config))
    for key in ("seed", "steps", "hop_ms", "fft_size", "theta", "m",
                "alpha", "eps"):
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if getattr(args, "weights", None):
        parts = args.weights.split(",")
        if len(parts) != 4:
            raise ValueError("--weights expects w_pseudo,w_g,w_recon,w_tv")
        settings["w_pseudo"], settings["w_g"], settings["w_recon"], \
            settings["w_tv"] = (float(p) for p in parts)
    if settings["steps"] <= 0:
        raise ValueError("steps must be positive")
    return settings


def _make_estimator(settings):
    return PitchEstimator(
        steps=settings["steps"],
        w_pseudo=settings["w_pseudo"],
        w_guide=settings["w_g"],
        w_recon=settings["w_recon"],
        w_smooth=settings["w_tv"],
        hinge_margin=settings["m"],
        ged_alpha=settings["alpha"],
        excitation_eps=settings["eps"],
        voicing_threshold=settings["theta"],
        fft_size=settings["fft_size"],
        frame_shift_s=settings["hop_ms"] / 1000.0,
        seed=settings["seed"],
    )


def _load_input(path, channel):
    w = load_wav(path, channel=channel)
    if w.sample_rate != INTERNAL_RATE:
        w = resample(w, INTERNAL_RATE)
    return w


def _analyze_one(path, out_path, csv_path, channel, settings):
    w = _load_input(path, channel)
    est = _make_estimator(settings)
    features = est.analyze(w)
    container.save_features(out_path, features)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            bands = features.band_aperiodicity.values
            header = ["frame", "f0_hz", "voicing_ratio"]
            header += [f"bap_{i}" for i in range(bands.shape[1])]
            fh.write(",".join(header) + "\n")
            for t in range(features.n_frames):
                row = [str(t), f"{features.pitch.f0_hz[t]:.6f}",
                       f"{features.voicing.soft_ratio[t]:.6f}"]
                row += [f"{b:.6f}" for b in bands[t]]
                fh.write(",".join(row) + "\n")
    return out_path


def cmd_analyze(args):
    settings = _resolve_settings(args)
    inputs = args.wav
    if len(inputs) > 1 and args.out_features and len(inputs) != len(
            args.out_features.split(",")):
        raise ValueError("one output per input required for multi-file runs")
    outputs = (args.out_features.split(",") if args.out_features
               else [p + ".slsh" for p in inputs])
    jobs = []
    for path, out in zip(inputs, outputs):
        jobs.append((path, out, args.csv if len(inputs) == 1 else None,
                     args.channel, settings))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_analyze_one_star, jobs))
    else:
        for job in jobs:
            _analyze_one(*job)
    return EXIT_OK


def _analyze_one_star(job):
    return _analyze_one(*job)


def cmd_synth(args):
    settings = _resolve_settings(args)
    features = container.load_features(args.features,
                                       voicing_threshold=settings["theta"])
    result = synthesize(features.pitch, features.envelope,
                        features.aperiodicity, seed=settings["seed"],
                        sample_rate=features.sample_rate,
                        frame_shift_s=features.frame_shift_s)
    save_wav(args.out_wav, result.waveform)
    return EXIT_OK


def cmd_guide(args):
    settings = _resolve_settings(args)
    w = _load_input(args.wav, args.channel)
    S = stft_amplitude(w, settings["fft_size"], settings["hop_ms"] / 1000.0)
    G = build_pitch_guide(S)
    container.write_csv_matrix(args.out_csv, G.values, G.frequencies)
    return EXIT_OK


def _load_estimate(path, settings):
    if path.endswith(".slsh"):
        features = container.load_features(path,
                                           voicing_threshold=settings["theta"])
        f0 = features.pitch.f0_hz
        voicing = features.voicing.flags
        shift = features.frame_shift_s
    else:
        track = load_pitch_labels(path, settings["hop_ms"] / 1000.0)
        f0 = track.f0_hz
        voicing = track.f0_hz > 0
        shift = settings["hop_ms"] / 1000.0
    return f0, voicing, shift


def cmd_eval(args):
    settings = _resolve_settings(args)
    est_f0, est_voicing, shift = _load_estimate(args.estimate, settings)
    ref = load_pitch_labels(args.reference, settings["hop_ms"] / 1000.0,
                            units=args.ref_units)
    scores = metrics.evaluate_all(est_f0, est_voicing, ref,
                                  frame_shift_s=shift)
    for key, value in scores.items():
        print(f"{key}={value:.6f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(scores, fh, indent=2)
    return EXIT_OK


def cmd_pseudo_demo(args):
    settings = _resolve_settings(args)
    w = _load_input(args.wav, args.channel)
    est = _make_estimator(settings)
    est.fit(w)
    S = est.spectrogram_
    if not 0 <= args.frame < S.n_frames:
        raise ValueError(
            f"frame {args.frame} out of range (0..{S.n_frames - 1})")
    excitation = pseudo_periodic_excitation(
        est.result_.pitch, settings["eps"], seed=settings["seed"],
        sample_rate=INTERNAL_RATE, n_bins=S.n_bins,
        frame_shift_s=S.frame_shift_s)
    with open(args.out_csv, "w", encoding="utf-8") as fh:
        fh.write("frequency_hz,target_spectrum,pseudo_excitation\n")
        freqs = S.bin_frequencies
        for k in range(S.n_bins):
            fh.write(f"{freqs[k]:.6f},{S.values[args.frame, k]:.8g},"
                     f"{excitation.values[args.frame, k]:.8g}\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pitchopt",
        description="Pitch, aperiodicity and voicing estimation by "
                    "gradient descent through differentiable DSP")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="waveform -> vocoder features")
    p.add_argument("wav", nargs="+")
    p.add_argument("--out-features", help="output container path(s), "
                   "comma-separated for multiple inputs")
    p.add_argument("--csv", help="also write per-frame f0/voicing/BAP CSV")
    p.add_argument("--channel", default="mix",
                   help="stereo handling: mix|left|right|<index>")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="vocoder features -> waveform")
    p.add_argument("features")
    p.add_argument("out_wav")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("guide", help="emit the pitch-guide matrix as CSV")
    p.add_argument("wav")
    p.add_argument("out_csv")
    p.add_argument("--channel", default="mix")
    _add_common(p)
    p.set_defaults(func=cmd_guide)

    p = sub.add_parser("eval", help="score an estimate against labels")
    p.add_argument("estimate", help="feature container (.slsh) or f0 text file")
    p.add_argument("reference", help="label file")
    p.add_argument("--ref-units", default="hz", choices=["hz", "semitone"])
    p.add_argument("--json", help="also write scores as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pseudo-demo",
                       help="emit target and excitation spectra for one frame")
    p.add_argument("wav")
    p.add_argument("out_csv")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--channel", default="mix")
    _add_common(p)
    p.set_defaults(func=cmd_pseudo_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
