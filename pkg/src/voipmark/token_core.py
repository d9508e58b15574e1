"""Preprocessing stage: signaling buffer, message hashing, nonces and token assembly.

Wire layout of a serialized token (normative)::

    digest (D bits, MSB first) | nonce (32 bits, big-endian, MSB first)

Token digest::

    H( H(payload) | enc(options) | nonce | [voice feature bytes] )

truncated to D bits, where ``enc(options)`` is a sequence of
``tag (1 byte) | length (2 bytes, big-endian) | value`` records in the fixed
order TS (0x01), PASS (0x02), ID (0x03).  A missing record means the option
is disabled.  TS is an unsigned 64-bit big-endian millisecond count.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import (
    ContractError,
    EmptyBufferError,
    FramingError,
    NonceExhaustedError,
    OrderingError,
)
from .voice_features import VoiceFeature, encode_features

NONCE_BITS = 32
NONCE_SPACE = 1 << NONCE_BITS

TAG_TS = 0x01
TAG_PASS = 0x02
TAG_ID = 0x03


class Direction(enum.Enum):
    SENT = "sent"
    RECEIVED = "received"


@dataclass(frozen=True)
class SignalingMessage:
    seq: int
    direction: Direction
    payload: bytes
    captured_at: int = 0  # ms since session start

    def __post_init__(self):
        if self.seq < 0:
            raise ContractError(f"seq must be non-negative, got {self.seq}")
        if not self.payload:
            raise ContractError("signaling payload must be non-empty")


@dataclass(frozen=True)
class SignalingBuffer:
    """Ordered store of signaling messages with a read cursor.

    Once every message has been read, ``next()`` keeps handing out the last
    one so token generation never runs dry.
    """

    messages: tuple[SignalingMessage, ...] = ()
    cursor: int = 0

    def __len__(self) -> int:
        return len(self.messages)

    def push(self, msg: SignalingMessage) -> SignalingBuffer:
        for old in self.messages:
            if old.direction is msg.direction and old.seq >= msg.seq:
                raise OrderingError(
                    f"seq {msg.seq} ({msg.direction.value}) does not follow buffered seq {old.seq}"
                )
        return replace(self, messages=self.messages + (msg,))

    def next(self) -> tuple[SignalingMessage, SignalingBuffer]:
        if not self.messages:
            raise EmptyBufferError("signaling buffer is empty")
        if self.cursor < len(self.messages):
            return self.messages[self.cursor], replace(self, cursor=self.cursor + 1)
        return self.messages[-1], self


def buffer_push(buf: SignalingBuffer, msg: SignalingMessage) -> SignalingBuffer:
    return buf.push(msg)


def buffer_next(buf: SignalingBuffer) -> tuple[SignalingMessage, SignalingBuffer]:
    return buf.next()


@dataclass(frozen=True)
class HashSpec:
    """Named hash primitive plus the digest width D both endpoints agree on."""

    name: str = "sha256"
    digest_bits: int = 256

    def __post_init__(self):
        if self.digest_bits <= 0 or self.digest_bits % 8:
            raise ContractError(f"digest_bits must be a positive multiple of 8, got {self.digest_bits}")
        try:
            h = hashlib.new(self.name)
        except (ValueError, TypeError) as exc:
            raise ContractError(f"unknown hash primitive {self.name!r}") from exc
        if not self.name.startswith("shake") and h.digest_size * 8 < self.digest_bits:
            raise ContractError(
                f"{self.name} yields {h.digest_size * 8} bits, fewer than digest_bits={self.digest_bits}"
            )

    @property
    def digest_bytes(self) -> int:
        return self.digest_bits // 8

    def digest(self, data: bytes) -> bytes:
        h = hashlib.new(self.name, data)
        if self.name.startswith("shake"):
            return h.digest(self.digest_bytes)
        return h.digest()[: self.digest_bytes]


DEFAULT_HASH = HashSpec()


def hash_message(msg: SignalingMessage, hash_spec: HashSpec = DEFAULT_HASH) -> bytes:
    return hash_spec.digest(msg.payload)


@dataclass(frozen=True)
class NonceGenerator:
    """Counter from a random per-session offset: unique by construction."""

    offset: int
    issued: int = 0

    @classmethod
    def from_seed(cls, seed: int) -> NonceGenerator:
        offset = int(np.random.default_rng(seed).integers(0, NONCE_SPACE, dtype=np.uint64))
        return cls(offset=offset)

    def next(self) -> tuple[int, NonceGenerator]:
        if self.issued >= NONCE_SPACE:
            raise NonceExhaustedError("all 2**32 nonces issued in this session")
        value = (self.offset + self.issued) % NONCE_SPACE
        return value, replace(self, issued=self.issued + 1)


def next_nonce(gen: NonceGenerator) -> tuple[int, NonceGenerator]:
    return gen.next()


@dataclass(frozen=True)
class TokenOptions:
    """Optional token fields; ``None`` disables the field."""

    ts: Optional[int] = None
    password: Optional[bytes] = None
    ident: Optional[bytes] = None
    protect_voice: bool = False

    def with_ident(self, ident: Optional[bytes]) -> TokenOptions:
        return replace(self, ident=ident)

    def encode(self) -> bytes:
        out = bytearray()
        if self.ts is not None:
            out += _tlv(TAG_TS, struct.pack(">Q", self.ts))
        if self.password is not None:
            out += _tlv(TAG_PASS, self.password)
        if self.ident is not None:
            out += _tlv(TAG_ID, self.ident)
        return bytes(out)


def _tlv(tag: int, value: bytes) -> bytes:
    if len(value) > 0xFFFF:
        raise ContractError(f"option value too long ({len(value)} bytes)")
    return struct.pack(">BH", tag, len(value)) + value


@dataclass(frozen=True)
class Token:
    digest: bytes
    nonce: int

    @property
    def width(self) -> int:
        return len(self.digest) * 8 + NONCE_BITS

    def to_bytes(self) -> bytes:
        return self.digest + struct.pack(">I", self.nonce)

    def hex(self) -> str:
        return f"{self.digest.hex()} {self.nonce:08x}"


def build_token(
    msg_digest: bytes,
    opts: TokenOptions,
    nonce: int,
    vf: Optional[VoiceFeature] = None,
    hash_spec: HashSpec = DEFAULT_HASH,
) -> Token:
    if (vf is not None) != opts.protect_voice:
        raise ContractError("voice feature must be supplied exactly when protect_voice is set")
    if not 0 <= nonce < NONCE_SPACE:
        raise ContractError(f"nonce out of 32-bit range: {nonce}")
    material = msg_digest + opts.encode() + struct.pack(">I", nonce)
    if vf is not None:
        material += encode_features(vf)
    return Token(hash_spec.digest(material), nonce)


def expected_token(
    local_msg: SignalingMessage,
    opts: TokenOptions,
    received_nonce: int,
    local_vf: Optional[VoiceFeature] = None,
    hash_spec: HashSpec = DEFAULT_HASH,
) -> Token:
    """Token the verifier should see, recomputed from its own copy of the message.

    ``opts.ident`` must carry the *sender's* identity.
    """
    return build_token(hash_message(local_msg, hash_spec), opts, received_nonce, local_vf, hash_spec)


def serialize_token(t: Token) -> np.ndarray:
    return np.unpackbits(np.frombuffer(t.to_bytes(), dtype=np.uint8))


def deserialize_token(bits, digest_bits: int = 256) -> Token:
    bits = np.asarray(bits, dtype=np.uint8)
    expected = digest_bits + NONCE_BITS
    if bits.ndim != 1 or bits.size != expected:
        raise FramingError(f"token needs exactly {expected} bits, got {bits.size}")
    if np.any(bits > 1):
        raise FramingError("token bits must be 0 or 1")
    raw = np.packbits(bits).tobytes()
    digest, nonce = raw[: digest_bits // 8], struct.unpack(">I", raw[digest_bits // 8 :])[0]
    return Token(digest, nonce)
