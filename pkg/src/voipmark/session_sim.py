"""Deterministic two-party call simulator.

The clock advances one audio segment at a time.  In each segment both
directions run the same pipeline:

1. the sender tops up its frame queue, building one token per frame from the
   next buffered signaling message (and, with voice protection, the feature
   of the segment it sent just before);
2. the frame bits are embedded into the outgoing segment;
3. attacker actions and channel impairments are applied;
4. the receiver extracts frames and, at every slot boundary, scores the slot
   and steps its Level-of-Trust state.

A slot is one frame's worth of carrier bits.  Frames are sent back to back
from stream position 0, so the frame for slot ``s`` starts at bit
``s * frame_bits`` and covers the voice segment preceding the one in which it
starts.  Attack segment indices count media segments from the first
warm-up segment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Union

import numpy as np

from .errors import ConfigError, SetupError
from .lot_verifier import (
    LotConfig,
    LotState,
    Outcome,
    SlotEvent,
    Status,
    TraceRow,
    format_trace,
    lot_finish,
    lot_init,
    lot_step,
    trace_rows,
)
from .token_core import (
    Direction,
    HashSpec,
    NonceGenerator,
    SignalingBuffer,
    SignalingMessage,
    Token,
    TokenOptions,
    build_token,
    expected_token,
    hash_message,
)
from .voice_features import EMPTY_FEATURE, AudioSegment, extract_features
from .watermark_channel import (
    BitstreamCursor,
    ChannelConfig,
    embed,
    extract,
    frame_token,
    frame_width,
    mark_lost,
)

DIRECTIONS = ("ab", "ba")


# --- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class ChannelModel:
    ber: float = 0.0  # flip probability per carrier bit
    segment_loss: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("ber", "segment_loss"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {p}")


@dataclass(frozen=True)
class TamperSignaling:
    seq: int
    offset: int = 0
    xor: int = 0xFF


@dataclass(frozen=True)
class StripWatermark:
    from_segment: int
    to_segment: int
    direction: str = "both"


@dataclass(frozen=True)
class ReplayTokens:
    from_slot: int
    direction: str = "ab"


@dataclass(frozen=True)
class SubstituteVoice:
    from_segment: int
    to_segment: int
    direction: str = "ab"
    gain_db: float = -24.0


Action = Union[TamperSignaling, StripWatermark, ReplayTokens, SubstituteVoice]


@dataclass(frozen=True)
class AttackScript:
    actions: tuple = ()

    def of_type(self, kind) -> list:
        return [a for a in self.actions if isinstance(a, kind)]


def _hits(direction_field: str, direction: str) -> bool:
    return direction_field == "both" or direction_field == direction


@dataclass(frozen=True)
class SessionConfig:
    hash_spec: HashSpec = HashSpec()
    channel: ChannelConfig = ChannelConfig()
    options: TokenOptions = TokenOptions()
    use_id: bool = True
    caller_id: bytes = b"alice@a.example"
    callee_id: bytes = b"bob@b.example"
    initial_x: int = 5
    critical_a: int = 1
    timer_limit_slots: int = 3
    message_count: int = 6
    warmup_seconds: float = 0.0
    duration_seconds: float = 60.0
    replay_guard: bool = True
    seed: int = 0

    @property
    def frame_bits(self) -> int:
        return frame_width(self.hash_spec.digest_bits)

    @property
    def slot_duration(self) -> float:
        return self.frame_bits / self.channel.capacity

    def lot_config(self) -> LotConfig:
        cfg = LotConfig(self.initial_x, self.critical_a, self.timer_limit_slots, self.slot_duration)
        cfg.validate()
        return cfg


# --- voice sources -----------------------------------------------------------


class VoiceSource(Protocol):
    def segment(self, index: int, n_samples: int, sample_rate: int) -> np.ndarray:
        ...


class Silence:
    def segment(self, index, n_samples, sample_rate):
        return np.zeros(n_samples, dtype=np.int16)


@dataclass(frozen=True)
class GeneratedVoice:
    """Speech-like test signal: a few harmonics plus noise under a
    randomly varying 20 ms loudness envelope.  Segment ``n`` depends only on
    ``(seed, n)``."""

    seed: int = 0
    gain_db: float = 0.0

    def segment(self, index, n_samples, sample_rate):
        rng = np.random.default_rng([self.seed, index])
        frame = max(1, sample_rate // 50)
        n_frames = -(-n_samples // frame)
        levels_db = rng.uniform(-54.0, -8.0, n_frames) + self.gain_db
        env = np.repeat(10.0 ** (levels_db / 20.0), frame)[:n_samples]
        t = (np.arange(n_samples) + index * n_samples) / sample_rate
        f0 = rng.uniform(110.0, 230.0)
        tone = sum(np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h for h in (1, 2, 3, 5))
        wave = 0.7 * tone / 1.9 + 0.3 * rng.standard_normal(n_samples)
        return np.clip(np.round(32767.0 * env * wave), -32768, 32767).astype(np.int16)


@dataclass(frozen=True)
class WavVoice:
    """Plays back a sample array; segments past the end are silent."""

    samples: np.ndarray

    def segment(self, index, n_samples, sample_rate):
        out = np.zeros(n_samples, dtype=np.int16)
        chunk = self.samples[index * n_samples : (index + 1) * n_samples]
        out[: len(chunk)] = chunk
        return out


# --- endpoints and signaling ---------------------------------------------------


@dataclass
class Endpoint:
    ident: bytes
    role: str  # "caller" or "callee"
    hash_spec: HashSpec
    options: TokenOptions  # ident already set to our own when IDs are in use
    use_id: bool
    channel: ChannelConfig
    lot_cfg: LotConfig
    nonce_gen: NonceGenerator
    sent: SignalingBuffer = field(default_factory=SignalingBuffer)
    received: SignalingBuffer = field(default_factory=SignalingBuffer)
    peer_ident: Optional[bytes] = None
    lot: Optional[LotState] = None
    tx: BitstreamCursor = None
    rx: BitstreamCursor = None
    seen_nonces: set = field(default_factory=set)

    def __post_init__(self):
        if self.lot is None:
            self.lot = lot_init(self.lot_cfg)
        if self.tx is None:
            self.tx = BitstreamCursor(self.hash_spec.digest_bits)
        if self.rx is None:
            self.rx = BitstreamCursor(self.hash_spec.digest_bits)

    def verifier_options(self) -> TokenOptions:
        """Options for recomputing the peer's tokens: the peer's ID, not ours."""
        return self.options.with_ident(self.peer_ident if self.use_id else None)


def make_endpoints(cfg: SessionConfig) -> tuple[Endpoint, Endpoint]:
    lot_cfg = cfg.lot_config()
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    ends = []
    for ident, role, ss in ((cfg.caller_id, "caller", seeds[0]), (cfg.callee_id, "callee", seeds[1])):
        opts = cfg.options.with_ident(ident if cfg.use_id else None)
        ends.append(Endpoint(
            ident=ident,
            role=role,
            hash_spec=cfg.hash_spec,
            options=opts,
            use_id=cfg.use_id,
            channel=cfg.channel,
            lot_cfg=lot_cfg,
            nonce_gen=NonceGenerator.from_seed(int(ss.generate_state(1)[0])),
        ))
    return ends[0], ends[1]


def run_signaling_phase(
    caller: Endpoint,
    callee: Endpoint,
    script: AttackScript = AttackScript(),
    message_count: int = 6,
    seed: int = 0,
) -> tuple[Endpoint, Endpoint]:
    """Exchange ``message_count`` opaque messages, alternating from the caller.

    ``seq`` is the global capture order.  Tampering edits only the copy the
    peer receives.
    """
    if len(caller.sent) or len(callee.sent) or len(caller.received) or len(callee.received):
        raise SetupError("signaling phase needs empty buffers")
    tampers = {}
    for t in script.of_type(TamperSignaling):
        if not 0 <= t.seq < message_count:
            raise ConfigError(f"tamper_signaling seq {t.seq} outside 0..{message_count - 1}")
        tampers.setdefault(t.seq, []).append(t)

    rng = np.random.default_rng([seed, 0x51])
    for seq in range(message_count):
        src, dst = (caller, callee) if seq % 2 == 0 else (callee, caller)
        payload = b"MSG %d %s->%s " % (seq, src.ident, dst.ident) + rng.bytes(24)
        at = seq * 20
        src.sent = src.sent.push(SignalingMessage(seq, Direction.SENT, payload, at))
        got = bytearray(payload)
        for t in tampers.get(seq, ()):
            if not 0 <= t.offset < len(got):
                raise ConfigError(f"tamper offset {t.offset} outside payload of {len(got)} bytes")
            got[t.offset] ^= t.xor & 0xFF
        dst.received = dst.received.push(SignalingMessage(seq, Direction.RECEIVED, bytes(got), at))
    caller.peer_ident, callee.peer_ident = callee.ident, caller.ident
    return caller, callee


def replay_guard(seen_nonces: set, token: Token, outcome: Outcome) -> Outcome:
    """Score reuse of an already accepted nonce as a mismatch.

    Accepted (matching, fresh) nonces are added to ``seen_nonces``.
    """
    if token.nonce in seen_nonces:
        return Outcome.MISMATCH
    if outcome is Outcome.MATCH:
        seen_nonces.add(token.nonce)
    return outcome


def check_compatible(a: Endpoint, b: Endpoint) -> None:
    if a.channel != b.channel:
        raise SetupError("endpoints disagree on channel configuration")
    if a.lot_cfg != b.lot_cfg:
        raise SetupError("endpoints disagree on LoT configuration")
    if a.hash_spec != b.hash_spec:
        raise SetupError("endpoints disagree on hash primitive")
    oa, ob = a.options, b.options
    if (oa.ts, oa.password, oa.protect_voice) != (ob.ts, ob.password, ob.protect_voice):
        raise SetupError("endpoints disagree on token options")
    if a.use_id != b.use_id:
        raise SetupError("endpoints disagree on identity use")


# --- reporting -----------------------------------------------------------------


@dataclass
class DirectionLog:
    name: str
    sent: int = 0
    recovered: int = 0
    matched: int = 0
    mismatched: int = 0
    no_token: int = 0
    stray_frames: int = 0
    dropped_frames: int = 0
    first_match_s: Optional[float] = None
    stop_time_s: Optional[float] = None
    events: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def rows(self) -> list[TraceRow]:
        return trace_rows(self.events, self.states)


@dataclass
class SessionReport:
    directions: dict  # "ab"/"ba" -> DirectionLog
    status: Status
    stopped_direction: Optional[str]
    end_time_s: float
    detection_latency_s: Optional[float]
    slot_duration_s: float
    frame_bits: int
    warmup_s: float
    conversation_s: float
    lot_cfg: LotConfig

    @property
    def exit_status(self) -> Status:
        return self.status

    def to_dict(self) -> dict:
        dirs = {}
        for name, log in self.directions.items():
            final = log.states[-1]
            dirs[name] = {
                "final": {"lot": final.lot, "timer_slots": final.timer, "slots": final.slot_index,
                          "status": final.status.value},
                "tokens": {"sent": log.sent, "recovered": log.recovered, "matched": log.matched,
                           "mismatched": log.mismatched},
                "no_token_slots": log.no_token,
                "dropped_frames": log.dropped_frames,
                "stray_frames": log.stray_frames,
                "first_match_s": log.first_match_s,
                "stop_time_s": log.stop_time_s,
            }
        return {
            "termination": {
                "status": self.status.value,
                "direction": self.stopped_direction,
                "time_s": self.end_time_s,
            },
            "detection_latency_s": self.detection_latency_s,
            "slot_duration_s": self.slot_duration_s,
            "frame_bits": self.frame_bits,
            "warmup_s": self.warmup_s,
            "conversation_s": self.conversation_s,
            "lot": {
                "initial_x": self.lot_cfg.initial_x,
                "critical_a": self.lot_cfg.critical_a,
                "timer_limit_slots": self.lot_cfg.timer_limit_slots,
            },
            "directions": dirs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def trace_text(self, direction: str) -> str:
        meta = {
            "direction": direction,
            "slot_duration": self.slot_duration_s,
            "initial_x": self.lot_cfg.initial_x,
            "critical_a": self.lot_cfg.critical_a,
            "timer_limit_slots": self.lot_cfg.timer_limit_slots,
        }
        return format_trace(self.directions[direction].rows(), meta)


# --- simulation ----------------------------------------------------------------


class Simulation:
    """Media phases of one call between two endpoints that finished signaling."""

    def __init__(
        self,
        caller: Endpoint,
        callee: Endpoint,
        channel: ChannelModel = ChannelModel(),
        script: AttackScript = AttackScript(),
        replay_guard: bool = True,
        substitute_seed: int = 0x5B,
    ):
        check_compatible(caller, callee)
        for end in (caller, callee):
            if not len(end.sent) or not len(end.received):
                raise SetupError(f"{end.role} has no signaling material to protect")
        self.caller, self.callee = caller, callee
        self.cfg = caller.channel
        self.lot_cfg = caller.lot_cfg
        self.model = channel
        self.script = script
        self.use_replay_guard = replay_guard
        self.protect_voice = caller.options.protect_voice
        self.frame_bits = frame_width(caller.hash_spec.digest_bits)
        self.slot_duration = self.lot_cfg.slot_duration
        self.segment = 0
        self.warmup_segments = 0
        self.conversation_segments = 0
        self.finished = False

        for r in script.of_type(ReplayTokens):
            if r.from_slot < 1:
                raise ConfigError("replay_tokens needs from_slot >= 1 (something to record first)")
        for a in script.actions:
            d = getattr(a, "direction", "both")
            if d not in ("ab", "ba", "both"):
                raise ConfigError(f"unknown attack direction {d!r}")
            if hasattr(a, "from_segment") and a.to_segment < a.from_segment:
                raise ConfigError("attack segment range is empty")

        self._pair = {"ab": (caller, callee), "ba": (callee, caller)}
        self.logs = {}
        for i, d in enumerate(DIRECTIONS):
            log = DirectionLog(d)
            log.states.append(self._pair[d][1].lot)
            self.logs[d] = log
        self._channel_rng = {d: np.random.default_rng([channel.seed, i]) for i, d in enumerate(DIRECTIONS)}
        self._attack_rng = {d: np.random.default_rng([channel.seed, 0xA7, i]) for i, d in enumerate(DIRECTIONS)}
        self._tx_features = {d: {} for d in DIRECTIONS}
        self._rx_features = {d: {} for d in DIRECTIONS}
        self._inbox = {d: {} for d in DIRECTIONS}
        self._next_slot = {d: 0 for d in DIRECTIONS}
        self._wire_history = {d: [] for d in DIRECTIONS}
        self._substitute = GeneratedVoice(seed=substitute_seed)

    # public phases

    def run_preconversation(self, warmup_seconds: float) -> None:
        n = math.ceil(warmup_seconds / self.cfg.segment_seconds - 1e-9) if warmup_seconds > 0 else 0
        silence = Silence()
        for _ in range(n):
            if self.finished:
                break
            self._tick(silence, silence, self.segment)
            self.warmup_segments += 1

    def run_conversation(self, voice_caller: VoiceSource, voice_callee: VoiceSource, duration_s: float) -> SessionReport:
        n = math.ceil(duration_s / self.cfg.segment_seconds - 1e-9)
        for i in range(n):
            if self.finished:
                break
            self._tick(voice_caller, voice_callee, i)
            self.conversation_segments += 1
        return self.report()

    def report(self) -> SessionReport:
        stopped = [(log.stop_time_s, i, d) for i, (d, log) in enumerate(self.logs.items())
                   if log.stop_time_s is not None]
        seg_s = self.cfg.segment_seconds
        if stopped:
            t, _, d = min(stopped)
            status, end_time = self.logs[d].states[-1].status, t
        else:
            d, status = None, Status.COMPLETED
            end_time = self.segment * seg_s
            for name, log in self.logs.items():
                end = self._pair[name][1]
                end.lot = lot_finish(end.lot)
                log.states[-1] = end.lot
        return SessionReport(
            directions=self.logs,
            status=status,
            stopped_direction=d,
            end_time_s=end_time,
            detection_latency_s=self._latency(end_time) if d else None,
            slot_duration_s=self.slot_duration,
            frame_bits=self.frame_bits,
            warmup_s=self.warmup_segments * seg_s,
            conversation_s=self.conversation_segments * seg_s,
            lot_cfg=self.lot_cfg,
        )

    # internals

    def _latency(self, stop_time: float) -> Optional[float]:
        onsets = []
        seg_s = self.cfg.segment_seconds
        for a in self.script.actions:
            if isinstance(a, TamperSignaling):
                onsets.append(0.0)
            elif isinstance(a, ReplayTokens):
                onsets.append(a.from_slot * self.slot_duration)
            else:
                onsets.append(a.from_segment * seg_s)
        onsets = [t for t in onsets if t <= stop_time]
        return stop_time - min(onsets) if onsets else None

    def _tick(self, voice_caller: VoiceSource, voice_callee: VoiceSource, voice_index: int) -> None:
        g = self.segment
        n, rate = self.cfg.segment_samples, self.cfg.sample_rate
        voices = {"ab": voice_caller, "ba": voice_callee}
        for d in DIRECTIONS:
            audio = AudioSegment(voices[d].segment(voice_index, n, rate), rate, g)
            self._direction_tick(d, g, audio)
        self.segment += 1
        if any(log.stop_time_s is not None for log in self.logs.values()):
            self.finished = True

    def _direction_tick(self, d: str, g: int, audio: AudioSegment) -> None:
        sender, receiver = self._pair[d]
        cfg, log, F = self.cfg, self.logs[d], self.frame_bits
        bps = cfg.bits_per_segment

        while len(sender.tx.pending) < bps:
            msg, sender.sent = sender.sent.next()
            vf = self._tx_features[d].get(g - 1, EMPTY_FEATURE) if self.protect_voice else None
            nonce, sender.nonce_gen = sender.nonce_gen.next()
            token = build_token(hash_message(msg, sender.hash_spec), sender.options, nonce, vf, sender.hash_spec)
            sender.tx.push_frame(frame_token(token))
        marked, _ = embed(audio, sender.tx, cfg)
        log.sent = sender.tx.tx_offset // F
        if self.protect_voice:
            self._tx_features[d][g] = extract_features(marked, cfg.embed_depth)

        wire = self._attack(d, g, marked)
        lost = self._channel_rng[d].random() < self.model.segment_loss
        wire = self._bit_errors(d, wire)

        if lost:
            mark_lost(receiver.rx, cfg)
            self._rx_features[d][g] = None
        else:
            recovered, _ = extract(wire, receiver.rx, cfg)
            if self.protect_voice:
                self._rx_features[d][g] = extract_features(wire, cfg.embed_depth)
            for rec in recovered:
                if rec.start_bit % F == 0:
                    self._inbox[d][rec.start_bit // F] = rec.token
                    log.recovered += 1
                else:
                    log.stray_frames += 1
        log.dropped_frames = receiver.rx.dropped_frames

        total_bits = (g + 1) * bps
        while receiver.lot.running and (self._next_slot[d] + 1) * F <= total_bits:
            self._score_slot(d, receiver, self._next_slot[d])
            self._next_slot[d] += 1

    def _score_slot(self, d: str, receiver: Endpoint, s: int) -> None:
        log, F = self.logs[d], self.frame_bits
        msg, receiver.received = receiver.received.next()
        token = self._inbox[d].pop(s, None)
        outcome = Outcome.NO_TOKEN
        if token is not None:
            vf = None
            verifiable = True
            if self.protect_voice:
                covered = (s * F) // self.cfg.bits_per_segment - 1
                vf = EMPTY_FEATURE if covered < 0 else self._rx_features[d].get(covered)
                verifiable = vf is not None
            if verifiable:
                want = expected_token(msg, receiver.verifier_options(), token.nonce, vf, receiver.hash_spec)
                outcome = Outcome.MATCH if want == token else Outcome.MISMATCH
                if self.use_replay_guard:
                    outcome = replay_guard(receiver.seen_nonces, token, outcome)
        if outcome is Outcome.MATCH:
            log.matched += 1
            if log.first_match_s is None:
                log.first_match_s = (s + 1) * self.slot_duration
        elif outcome is Outcome.MISMATCH:
            log.mismatched += 1
        else:
            log.no_token += 1
        ev = SlotEvent(s, outcome)
        receiver.lot = lot_step(receiver.lot, ev, self.lot_cfg)
        log.events.append(ev)
        log.states.append(receiver.lot)
        if not receiver.lot.running:
            log.stop_time_s = (s + 1) * self.slot_duration

    def _attack(self, d: str, g: int, marked: AudioSegment) -> AudioSegment:
        cfg = self.cfg
        codec = cfg.codec()
        samples = np.array(marked.samples, dtype=np.int16, copy=True)
        mask = np.int16((1 << cfg.embed_depth) - 1)

        replays = [r for r in self.script.of_type(ReplayTokens) if _hits(r.direction, d)]
        if replays:
            bits = codec.extract_bits(samples, cfg)
            if bits is not None:
                history = self._wire_history[d]
                history.append(bits)
                stream = np.concatenate(history)
                F, bps = self.frame_bits, cfg.bits_per_segment
                r = min(replays, key=lambda a: a.from_slot)
                start = r.from_slot * F
                positions = np.arange(g * bps, (g + 1) * bps)
                forged = positions >= start
                if forged.any():
                    src = (r.from_slot - 1) * F + (positions[forged] - start) % F
                    bits = bits.copy()
                    bits[forged] = stream[src]
                    samples = codec.embed_bits(samples, bits, cfg)

        for sv in self.script.of_type(SubstituteVoice):
            if _hits(sv.direction, d) and sv.from_segment <= g <= sv.to_segment:
                fake = GeneratedVoice(self._substitute.seed, sv.gain_db).segment(g, len(samples), cfg.sample_rate)
                samples = (fake & ~mask) | (samples & mask)

        for st in self.script.of_type(StripWatermark):
            if _hits(st.direction, d) and st.from_segment <= g <= st.to_segment:
                noise = self._attack_rng[d].integers(0, 1 << cfg.embed_depth, len(samples)).astype(np.int16)
                samples = (samples & ~mask) | noise

        return AudioSegment(samples, marked.sample_rate, marked.seg_index)

    def _bit_errors(self, d: str, wire: AudioSegment) -> AudioSegment:
        if self.model.ber <= 0.0:
            return wire
        codec = self.cfg.codec()
        bits = codec.extract_bits(wire.samples, self.cfg)
        flips = self._channel_rng[d].random(self.cfg.bits_per_segment) < self.model.ber
        if bits is None or not flips.any():
            return wire
        out = codec.embed_bits(wire.samples, bits ^ flips.astype(np.uint8), self.cfg)
        return AudioSegment(out, wire.sample_rate, wire.seg_index)


def run_session(
    cfg: SessionConfig,
    channel: ChannelModel = ChannelModel(),
    script: AttackScript = AttackScript(),
    voice_caller: Optional[VoiceSource] = None,
    voice_callee: Optional[VoiceSource] = None,
) -> SessionReport:
    """Signaling, optional warm-up and conversation in one call."""
    caller, callee = make_endpoints(cfg)
    run_signaling_phase(caller, callee, script, cfg.message_count, cfg.seed)
    sim = Simulation(caller, callee, channel, script, cfg.replay_guard)
    sim.run_preconversation(cfg.warmup_seconds)
    if voice_caller is None:
        voice_caller = GeneratedVoice(seed=cfg.seed * 2 + 1)
    if voice_callee is None:
        voice_callee = GeneratedVoice(seed=cfg.seed * 2 + 2)
    return sim.run_conversation(voice_caller, voice_callee, cfg.duration_seconds)


def frame_survival_rate(ber: float, trials: int, digest_bits: int = 256, seed: int = 0) -> float:
    """Monte Carlo fraction of frames recovered intact through a BER channel.

    Each trial embeds one fresh frame (followed by idle bits) with the
    reference codec, flips carrier bits independently with probability
    ``ber`` and checks that exactly the sent token comes back.
    """
    rng = np.random.default_rng(seed)
    F = frame_width(digest_bits)
    cfg = ChannelConfig(capacity=400, sample_rate=8000)
    segs = math.ceil(F / cfg.bits_per_segment)
    codec = cfg.codec()
    ok = 0
    for _ in range(trials):
        token = Token(rng.bytes(digest_bits // 8), int(rng.integers(0, 1 << 32)))
        tx = BitstreamCursor(digest_bits)
        rx = BitstreamCursor(digest_bits)
        tx.push_frame(frame_token(token))
        got = []
        for i in range(segs + 1):
            audio = AudioSegment(np.zeros(cfg.segment_samples, dtype=np.int16), cfg.sample_rate, i)
            marked, _ = embed(audio, tx, cfg)
            bits = codec.extract_bits(marked.samples, cfg)
            # errors only on the frame's own bits, so idle padding cannot fake a loss
            positions = np.arange(i * cfg.bits_per_segment, (i + 1) * cfg.bits_per_segment)
            flips = (rng.random(len(bits)) < ber) & (positions < F)
            noisy = AudioSegment(codec.embed_bits(marked.samples, bits ^ flips.astype(np.uint8), cfg), cfg.sample_rate, i)
            recovered, _ = extract(noisy, rx, cfg)
            got.extend(recovered)
        ok += len(got) == 1 and got[0].token == token and got[0].start_bit == 0
    return ok / trials
