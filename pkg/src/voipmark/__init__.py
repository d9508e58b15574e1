"""Authentication and integrity for IP telephony calls via tokens carried in
an audio watermark channel."""

from .errors import VoipmarkError
from .lot_verifier import LotConfig, LotState, Outcome, SlotEvent, Status, lot_init, lot_step, lot_trace
from .session_sim import (
    AttackScript,
    ChannelModel,
    SessionConfig,
    SessionReport,
    Simulation,
    run_session,
)
from .token_core import HashSpec, SignalingBuffer, SignalingMessage, Token, TokenOptions, build_token
from .watermark_channel import ChannelConfig

__version__ = "0.1.0"

__all__ = [
    "AttackScript", "ChannelConfig", "ChannelModel", "HashSpec", "LotConfig", "LotState",
    "Outcome", "SessionConfig", "SessionReport", "SignalingBuffer", "SignalingMessage",
    "Simulation", "SlotEvent", "Status", "Token", "TokenOptions", "VoipmarkError",
    "build_token", "lot_init", "lot_step", "lot_trace", "run_session",
]
