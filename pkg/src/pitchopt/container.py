"""Binary feature container and CSV export.

Layout (all little-endian): a file header of magic ``SLSH``, version u16
and block count u16, followed by blocks of (tag 4 bytes, T u32, K u32,
frame_shift f64, row-major float32 payload).  A single-spectrogram dump is
a one-block file; vocoder feature sets store one block per feature.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .features import (Aperiodicity, BandAperiodicity, PitchTrack,
                       VocoderFeatureSet, VoicingMask)
from .spectral import AmplitudeSpectrogram, SpectralEnvelope

MAGIC = b"SLSH"
VERSION = 1

TAG_SPECTROGRAM = b"SPEC"
TAG_CQT = b"CQT "
TAG_GUIDE = b"GUID"
TAG_F0 = b"F0  "
TAG_ENVELOPE = b"ENV "
TAG_BAP = b"BAP "
TAG_VUV = b"VUV "

_HEADER = struct.Struct("<4sHH")
_BLOCK = struct.Struct("<4sIId")


@dataclass
class Block:
    tag: bytes
    values: np.ndarray
    frame_shift_s: float


def write_blocks(path, blocks) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(blocks)))
        for block in blocks:
            values = np.ascontiguousarray(block.values, dtype="<f4")
            if values.ndim == 1:
                values = values[:, None]
            T, K = values.shape
            fh.write(_BLOCK.pack(block.tag, T, K, float(block.frame_shift_s)))
            fh.write(values.tobytes())


def read_blocks(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        blocks = []
        for _ in range(count):
            raw = fh.read(_BLOCK.size)
            if len(raw) < _BLOCK.size:
                raise ValueError(f"{path}: truncated block header")
            tag, T, K, shift = _BLOCK.unpack(raw)
            payload = fh.read(4 * T * K)
            if len(payload) < 4 * T * K:
                raise ValueError(f"{path}: truncated payload for {tag!r}")
            values = np.frombuffer(payload, dtype="<f4").reshape(T, K)
            blocks.append(Block(tag, values.copy(), shift))
    return blocks


def save_spectrogram(path, S: AmplitudeSpectrogram, tag=TAG_SPECTROGRAM) -> None:
    write_blocks(path, [Block(tag, S.values, S.frame_shift_s)])


def load_spectrogram(path, sample_rate=24000) -> AmplitudeSpectrogram:
    blocks = read_blocks(path)
    if not blocks:
        raise ValueError(f"{path}: empty container")
    block = blocks[0]
    return AmplitudeSpectrogram(block.values.astype(np.float64),
                                block.frame_shift_s, sample_rate)


def save_features(path, features: VocoderFeatureSet) -> None:
    shift = features.frame_shift_s
    write_blocks(path, [
        Block(TAG_F0, features.pitch.f0_hz, shift),
        Block(TAG_ENVELOPE, features.envelope.log_values, shift),
        Block(TAG_BAP, features.band_aperiodicity.values, shift),
        Block(TAG_VUV, features.voicing.soft_ratio, shift),
    ])


def load_features(path, sample_rate=24000,
                  voicing_threshold=0.5) -> VocoderFeatureSet:
    by_tag = {b.tag: b for b in read_blocks(path)}
    missing = [t for t in (TAG_F0, TAG_ENVELOPE, TAG_BAP, TAG_VUV)
               if t not in by_tag]
    if missing:
        raise ValueError(f"{path}: missing blocks {missing}")
    from .synth import bap_to_aperiodicity  # local import avoids a cycle

    f0 = by_tag[TAG_F0].values.astype(np.float64).ravel()
    env = SpectralEnvelope(by_tag[TAG_ENVELOPE].values.astype(np.float64))
    bap = BandAperiodicity(by_tag[TAG_BAP].values.astype(np.float64))
    soft = by_tag[TAG_VUV].values.astype(np.float64).ravel()
    shift = by_tag[TAG_F0].frame_shift_s
    aperiodicity = bap_to_aperiodicity(bap, env.log_values.shape[1], sample_rate)
    return VocoderFeatureSet(
        pitch=PitchTrack(f0),
        envelope=env,
        aperiodicity=aperiodicity,
        voicing=VoicingMask(soft >= voicing_threshold, soft),
        band_aperiodicity=bap,
        frame_shift_s=shift,
        sample_rate=sample_rate,
    )


def write_csv_matrix(path, values, column_axis, value_format="%.8g") -> None:
    """Matrix CSV with a frequency-axis header row (first column is frame)."""
    values = np.asarray(values)
    header = "frame," + ",".join(f"{f:.6g}" for f in column_axis)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for t, row in enumerate(values):
            fh.write(str(t) + "," +
                     ",".join(value_format % v for v in row) + "\n")
