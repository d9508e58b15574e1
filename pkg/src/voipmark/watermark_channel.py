"""Carry token frames inside PCM audio.

Frame layout on the carrier bitstream (normative)::

    sync 0xA55A (16 bits) | token (D + 32 bits) | CRC-8 (8 bits)

The CRC is CRC-8 with polynomial 0x07, init 0x00, no reflection, no final
XOR, computed over the token bytes.  When no frame bits are pending, the
embedder writes an idle pattern whose bit at absolute stream position ``p``
is ``p % 2``; an alternating sequence never contains the sync word.

The reference codec writes the stream into the lowest ``embed_depth`` bits
of carrier samples ``0, s, 2s, ...`` of each segment with
``s = sample_rate // capacity``.  Each carrier holds ``embed_depth`` bits,
most significant first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Protocol

import numpy as np

from .errors import ConfigError, ContractError
from .token_core import NONCE_BITS, Token, deserialize_token
from .voice_features import AudioSegment

SYNC_WORD = 0xA55A
SYNC_BITS = np.unpackbits(np.array([SYNC_WORD >> 8, SYNC_WORD & 0xFF], dtype=np.uint8))
CRC_POLY = 0x07
ERASED = 2  # placeholder for carrier bits that never arrived

REFERENCE_CAPACITIES = (1, 30, 48)


def _crc8_table(poly: int) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC_TABLE = _crc8_table(CRC_POLY)


def crc8(data: bytes, init: int = 0x00) -> int:
    crc = init
    for b in data:
        crc = _CRC_TABLE[crc ^ b]
    return crc


def frame_width(digest_bits: int) -> int:
    return 16 + digest_bits + NONCE_BITS + 8


@dataclass(frozen=True)
class ChannelConfig:
    capacity: int = 48  # bits per second of audio
    embed_depth: int = 1
    sample_rate: int = 8000
    codec_id: str = "lsb_reference"
    segment_seconds: float = 1.0

    def __post_init__(self):
        if self.capacity <= 0:
            raise ConfigError(f"capacity must be positive, got {self.capacity}")
        if self.capacity > self.sample_rate:
            raise ConfigError(f"capacity {self.capacity} exceeds sample rate {self.sample_rate}")
        if not 1 <= self.embed_depth < 8:
            raise ConfigError(f"embed_depth must be in [1, 8), got {self.embed_depth}")
        if self.codec_id not in CODECS:
            raise ConfigError(f"unknown codec {self.codec_id!r}; known: {', '.join(CODECS)}")
        bits = self.capacity * self.segment_seconds
        if bits < 1 or abs(bits - round(bits)) > 1e-9:
            raise ConfigError(
                f"capacity x segment duration must be a whole number of bits >= 1, got {bits}"
            )
        samples = self.sample_rate * self.segment_seconds
        if abs(samples - round(samples)) > 1e-9:
            raise ConfigError("segment duration must span a whole number of samples")

    @property
    def bits_per_segment(self) -> int:
        return int(round(self.capacity * self.segment_seconds))

    @property
    def segment_samples(self) -> int:
        return int(round(self.sample_rate * self.segment_seconds))

    @property
    def carrier_spacing(self) -> int:
        return self.sample_rate // self.capacity

    def carrier_indices(self) -> np.ndarray:
        n_carriers = math.ceil(self.bits_per_segment / self.embed_depth)
        return np.arange(n_carriers) * self.carrier_spacing

    def codec(self) -> Codec:
        return CODECS[self.codec_id]


class Codec(Protocol):
    def embed_bits(self, samples: np.ndarray, bits: np.ndarray, cfg: ChannelConfig) -> np.ndarray:
        ...

    def extract_bits(self, samples: np.ndarray, cfg: ChannelConfig) -> Optional[np.ndarray]:
        ...


class LsbCodec:
    """Reference low-bit codec."""

    def embed_bits(self, samples, bits, cfg):
        idx = cfg.carrier_indices()
        d = cfg.embed_depth
        padded = np.zeros(len(idx) * d, dtype=np.int16)
        padded[: len(bits)] = bits
        weights = (1 << np.arange(d - 1, -1, -1)).astype(np.int16)
        values = (padded.reshape(len(idx), d) * weights).sum(axis=1).astype(np.int16)
        mask = np.int16((1 << d) - 1)
        out = np.array(samples, dtype=np.int16, copy=True)
        out[idx] = (out[idx] & ~mask) | values
        return out

    def extract_bits(self, samples, cfg):
        idx = cfg.carrier_indices()
        d = cfg.embed_depth
        values = np.asarray(samples, dtype=np.int16)[idx] & np.int16((1 << d) - 1)
        shifts = np.arange(d - 1, -1, -1)
        bits = ((values[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
        return bits[: cfg.bits_per_segment]


class NullCodec:
    """Carries nothing; audio passes through untouched."""

    def embed_bits(self, samples, bits, cfg):
        return np.array(samples, dtype=np.int16, copy=True)

    def extract_bits(self, samples, cfg):
        return None


CODECS: dict[str, Codec] = {
    "lsb_reference": LsbCodec(),
    "null_passthrough": NullCodec(),
}


@dataclass(frozen=True)
class TokenFrame:
    payload: bytes
    crc: int
    sync: int = SYNC_WORD

    def bits(self) -> np.ndarray:
        raw = self.sync.to_bytes(2, "big") + self.payload + bytes([self.crc])
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))

    @property
    def width(self) -> int:
        return 16 + len(self.payload) * 8 + 8


def frame_token(t: Token) -> TokenFrame:
    payload = t.to_bytes()
    return TokenFrame(payload=payload, crc=crc8(payload))


class Recovered(NamedTuple):
    token: Token
    start_bit: int  # absolute stream position of the frame's first sync bit


@dataclass
class BitstreamCursor:
    """FIFO state for one end of a carrier bitstream.

    The embedding side uses ``pending`` and ``tx_offset``; the extracting side
    uses ``collected``, ``rx_base`` and ``dropped_frames``.
    """

    digest_bits: int = 256
    pending: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    tx_offset: int = 0
    collected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    rx_base: int = 0
    dropped_frames: int = 0

    def push_bits(self, bits) -> None:
        self.pending = np.concatenate([self.pending, np.asarray(bits, dtype=np.uint8)])

    def push_frame(self, frame: TokenFrame) -> None:
        self.push_bits(frame.bits())

    @property
    def rx_offset(self) -> int:
        """Absolute stream position just past the last collected bit."""
        return self.rx_base + len(self.collected)


def idle_bits(start: int, n: int) -> np.ndarray:
    return (np.arange(start, start + n) % 2).astype(np.uint8)


def embed(seg: AudioSegment, cursor: BitstreamCursor, cfg: ChannelConfig) -> tuple[AudioSegment, BitstreamCursor]:
    """Write the next ``bits_per_segment`` stream bits into ``seg``.

    The cursor is advanced in place and returned for convenience.
    """
    if len(seg) != cfg.segment_samples:
        raise ContractError(f"segment has {len(seg)} samples, channel expects {cfg.segment_samples}")
    n = cfg.bits_per_segment
    take = min(n, len(cursor.pending))
    bits = np.concatenate([cursor.pending[:take], idle_bits(cursor.tx_offset + take, n - take)])
    cursor.pending = cursor.pending[take:]
    cursor.tx_offset += n
    marked = cfg.codec().embed_bits(seg.samples, bits, cfg)
    return AudioSegment(marked, seg.sample_rate, seg.seg_index), cursor


def mark_lost(cursor: BitstreamCursor, cfg: ChannelConfig) -> BitstreamCursor:
    """Account for a segment that never reached the extractor."""
    cursor.collected = np.concatenate(
        [cursor.collected, np.full(cfg.bits_per_segment, ERASED, dtype=np.uint8)]
    )
    _scan(cursor)
    return cursor


def extract(seg: AudioSegment, cursor: BitstreamCursor, cfg: ChannelConfig) -> tuple[list[Recovered], BitstreamCursor]:
    bits = cfg.codec().extract_bits(seg.samples, cfg)
    if bits is None:
        bits = np.full(cfg.bits_per_segment, ERASED, dtype=np.uint8)
    cursor.collected = np.concatenate([cursor.collected, bits.astype(np.uint8)])
    return _scan(cursor), cursor


def _find_sync(buf: np.ndarray, start: int) -> int:
    if len(buf) - start < 16:
        return -1
    windows = np.lib.stride_tricks.sliding_window_view(buf[start:], 16)
    hits = np.flatnonzero((windows == SYNC_BITS).all(axis=1))
    return start + int(hits[0]) if hits.size else -1


def _scan(cursor: BitstreamCursor) -> list[Recovered]:
    buf = cursor.collected
    width = frame_width(cursor.digest_bits)
    token_bits = cursor.digest_bits + NONCE_BITS
    out: list[Recovered] = []
    i = 0
    while True:
        p = _find_sync(buf, i)
        if p < 0:
            i = max(i, len(buf) - 15)
            break
        if p + width > len(buf):
            i = p
            break
        body = buf[p + 16 : p + width]
        if np.any(body == ERASED):
            cursor.dropped_frames += 1
            i = p + 1
            continue
        payload = np.packbits(body[:token_bits]).tobytes()
        crc = int(np.packbits(body[token_bits:])[0])
        if crc8(payload) != crc:
            cursor.dropped_frames += 1
            i = p + 1
            continue
        out.append(Recovered(deserialize_token(body[:token_bits], cursor.digest_bits), cursor.rx_base + p))
        i = p + width
    cursor.collected = buf[i:]
    cursor.rx_base += i
    return out


@dataclass(frozen=True)
class TransparencyReport:
    max_sample_delta: int
    snr_db: float  # math.inf when the segments are identical


def transparency_report(original: AudioSegment, marked: AudioSegment) -> TransparencyReport:
    a = np.asarray(original.samples, dtype=np.float64)
    b = np.asarray(marked.samples, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.size} vs {b.size} samples")
    diff = b - a
    max_delta = int(np.max(np.abs(diff))) if diff.size else 0
    noise = float(np.sum(diff * diff))
    if noise == 0.0:
        return TransparencyReport(max_delta, math.inf)
    signal = float(np.sum(a * a))
    snr = 10.0 * math.log10(signal / noise) if signal > 0 else -math.inf
    return TransparencyReport(max_delta, snr)
