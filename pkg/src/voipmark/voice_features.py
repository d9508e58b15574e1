"""Voice feature extraction: coarse per-frame loudness codes.

Each 20 ms frame is reduced to a 4-bit code, roughly one code per 6 dB of
RMS level.  The watermark-bearing low bits are zeroed before measuring, so
the codes come out identical before and after embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, TooShortError

FRAME_MS = 20
MAX_CODE = 15
INT16_MIN, INT16_MAX = -32768, 32767


@dataclass(frozen=True)
class AudioSegment:
    samples: np.ndarray
    sample_rate: int = 8000
    seg_index: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise ContractError("audio segment must be mono (1-D)")
        if s.dtype != np.int16:
            if s.size and (s.min() < INT16_MIN or s.max() > INT16_MAX):
                raise ContractError("sample values outside 16-bit signed range")
            s = s.astype(np.int16)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class VoiceFeature:
    frame_energies: tuple[int, ...]

    def __post_init__(self):
        if any(not 0 <= c <= MAX_CODE for c in self.frame_energies):
            raise ContractError("feature codes must lie in [0, 15]")


EMPTY_FEATURE = VoiceFeature(())


def energy_code(rms: float) -> int:
    if rms < 1.0:
        return 0
    return min(MAX_CODE, int(math.floor(math.log2(rms))) + 1)


def extract_features(seg: AudioSegment, embed_depth: int = 1) -> VoiceFeature:
    if not 0 <= embed_depth < 8:
        raise ContractError(f"embed_depth must be in [0, 8), got {embed_depth}")
    frame_len = seg.sample_rate * FRAME_MS // 1000
    n_frames = len(seg) // frame_len
    if n_frames == 0:
        raise TooShortError(f"segment of {len(seg)} samples is shorter than one {FRAME_MS} ms frame")
    mask = np.int16(~((1 << embed_depth) - 1))
    coarse = (seg.samples[: n_frames * frame_len] & mask).astype(np.float64)
    frames = coarse.reshape(n_frames, frame_len)
    rms = np.sqrt(np.mean(frames * frames, axis=1))
    return VoiceFeature(tuple(energy_code(float(r)) for r in rms))


def encode_features(vf: VoiceFeature) -> bytes:
    """Pack codes two per byte, first code in the high nibble; odd tails pad with 0."""
    codes = list(vf.frame_energies)
    if len(codes) % 2:
        codes.append(0)
    return bytes((hi << 4) | lo for hi, lo in zip(codes[0::2], codes[1::2]))
