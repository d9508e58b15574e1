"""Scenario files: flat ``key = value`` text, ``#`` starts a comment.

``attack`` may repeat; every other key may appear once.  Unknown keys and
bad values are reported with the offending line number.  See
``scenarios/example.scn`` for every key with its default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError, VoipmarkError
from .session_sim import (
    AttackScript,
    ChannelModel,
    GeneratedVoice,
    ReplayTokens,
    SessionConfig,
    StripWatermark,
    SubstituteVoice,
    TamperSignaling,
    WavVoice,
)
from .token_core import HashSpec, TokenOptions
from .watermark_channel import ChannelConfig
from .wavio import read_wav

SEED_ENV = "VOIPMARK_SEED"

DEFAULTS = {
    "name": "scenario",
    "seed": "0",
    "message_count": "6",
    "warmup_seconds": "0",
    "duration_seconds": "60",
    "hash": "sha256",
    "digest_bits": "256",
    "ts": "",
    "password": "",
    "use_id": "true",
    "caller_id": "alice@a.example",
    "callee_id": "bob@b.example",
    "protect_voice": "false",
    "capacity": "48",
    "embed_depth": "1",
    "sample_rate": "8000",
    "segment_seconds": "1",
    "codec": "lsb_reference",
    "initial_x": "5",
    "critical_a": "1",
    "timer_limit_slots": "3",
    "replay_guard": "true",
    "ber": "0",
    "segment_loss": "0",
    "channel_seed": "0",
    "voice_caller": "generated",
    "voice_callee": "generated",
    "output_dir": "out",
}

# attack kind -> (class, required params, optional params)
ATTACKS = {
    "tamper_signaling": (TamperSignaling, ("seq",), ("offset", "xor")),
    "strip_watermark": (StripWatermark, ("from_segment", "to_segment"), ("direction",)),
    "replay_tokens": (ReplayTokens, ("from_slot",), ("direction",)),
    "substitute_voice": (SubstituteVoice, ("from_segment", "to_segment"), ("direction", "gain_db")),
}


@dataclass
class Scenario:
    name: str
    session: SessionConfig
    channel_model: ChannelModel
    script: AttackScript
    voice_caller: object
    voice_callee: object
    output_dir: Path
    source: Optional[Path] = None
    raw: dict = field(default_factory=dict)


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {v!r}")


def _parse_attack(text: str):
    kind, *params = text.split()
    if kind not in ATTACKS:
        raise ValueError(f"unknown attack {kind!r}; known: {', '.join(ATTACKS)}")
    cls, required, optional = ATTACKS[kind]
    kwargs = {}
    for p in params:
        key, sep, value = p.partition("=")
        if not sep or key not in required + optional:
            raise ValueError(f"bad parameter {p!r} for {kind}")
        if key == "direction":
            kwargs[key] = value
        elif key == "gain_db":
            kwargs[key] = float(value)
        else:
            kwargs[key] = int(value, 0)
    missing = [k for k in required if k not in kwargs]
    if missing:
        raise ValueError(f"{kind} needs {', '.join(missing)}")
    return cls(**kwargs)


def parse_lines(text: str, origin: str = "<scenario>") -> tuple[dict, dict, list]:
    """Return ``(values, line_of_key, attacks)``."""
    values, where, attacks = {}, {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        if key == "attack":
            try:
                attacks.append(_parse_attack(value))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{origin}:{lineno}: {exc}") from exc
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        values[key] = value
        where[key] = lineno
    return values, where, attacks


def _voice(spec: str, base: Path, seed: int, sample_rate: int):
    if spec == "generated":
        return GeneratedVoice(seed=seed)
    path = Path(spec)
    if not path.is_absolute():
        path = base / path
    samples, rate = read_wav(path)
    if rate != sample_rate:
        raise ValueError(f"{path} has sample rate {rate}, scenario uses {sample_rate}")
    return WavVoice(samples)


def load_scenario(text: str, origin: str = "<scenario>", base_dir: Optional[Path] = None) -> Scenario:
    values, where, attacks = parse_lines(text, origin)
    merged = dict(DEFAULTS)
    if "seed" not in values and os.environ.get(SEED_ENV):
        merged["seed"] = os.environ[SEED_ENV]
    merged.update(values)
    base_dir = base_dir or Path.cwd()

    def ctx(key: str) -> str:
        return f"{origin}:{where[key]}" if key in where else f"{origin} (default for {key})"

    def get(key, conv=str):
        try:
            return conv(merged[key])
        except (ValueError, VoipmarkError) as exc:
            raise ConfigError(f"{ctx(key)}: bad {key}: {exc}") from exc

    seed = get("seed", lambda v: int(v, 0))
    try:
        hash_spec = HashSpec(get("hash"), get("digest_bits", int))
    except VoipmarkError as exc:
        raise ConfigError(f"{ctx('digest_bits')}: {exc}") from exc
    ts = get("ts", lambda v: int(v) if v else None)
    password = merged["password"].encode() or None
    options = TokenOptions(ts=ts, password=password, protect_voice=get("protect_voice", _bool))
    try:
        channel = ChannelConfig(
            capacity=get("capacity", int),
            embed_depth=get("embed_depth", int),
            sample_rate=get("sample_rate", int),
            codec_id=get("codec"),
            segment_seconds=get("segment_seconds", float),
        )
    except ConfigError as exc:
        raise ConfigError(f"{ctx('capacity')}: {exc}") from exc
    session = SessionConfig(
        hash_spec=hash_spec,
        channel=channel,
        options=options,
        use_id=get("use_id", _bool),
        caller_id=merged["caller_id"].encode(),
        callee_id=merged["callee_id"].encode(),
        initial_x=get("initial_x", int),
        critical_a=get("critical_a", int),
        timer_limit_slots=get("timer_limit_slots", int),
        message_count=get("message_count", int),
        warmup_seconds=get("warmup_seconds", float),
        duration_seconds=get("duration_seconds", float),
        replay_guard=get("replay_guard", _bool),
        seed=seed,
    )
    try:
        session.lot_config()
    except ConfigError as exc:
        raise ConfigError(f"{ctx('initial_x')}: {exc}") from exc
    if session.message_count < 2:
        raise ConfigError(f"{ctx('message_count')}: need at least one message per direction (>= 2)")
    try:
        model = ChannelModel(get("ber", float), get("segment_loss", float), get("channel_seed", lambda v: int(v, 0)))
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    voices = []
    for key, vseed in (("voice_caller", seed * 2 + 1), ("voice_callee", seed * 2 + 2)):
        try:
            voices.append(_voice(merged[key], base_dir, vseed, channel.sample_rate))
        except (ValueError, VoipmarkError) as exc:
            raise ConfigError(f"{ctx(key)}: {exc}") from exc
    return Scenario(
        name=merged["name"],
        session=session,
        channel_model=model,
        script=AttackScript(tuple(attacks)),
        voice_caller=voices[0],
        voice_callee=voices[1],
        output_dir=Path(merged["output_dir"]),
        raw=merged,
    )


def load_scenario_file(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    sc = load_scenario(text, str(path), path.parent)
    sc.source = path
    return sc
