import dataclasses

import pytest

from voipmark.errors import ConfigError, SetupError
from voipmark.lot_verifier import Outcome, Status
from voipmark.session_sim import (
    AttackScript,
    ChannelModel,
    GeneratedVoice,
    ReplayTokens,
    SessionConfig,
    Simulation,
    StripWatermark,
    SubstituteVoice,
    TamperSignaling,
    make_endpoints,
    replay_guard,
    run_session,
    run_signaling_phase,
)
from voipmark.token_core import HashSpec, Token, TokenOptions
from voipmark.watermark_channel import ChannelConfig


def signaled(cfg=SessionConfig(), script=AttackScript()):
    caller, callee = make_endpoints(cfg)
    run_signaling_phase(caller, callee, script, cfg.message_count, cfg.seed)
    return caller, callee


def payloads(buf):
    return [m.payload for m in buf.messages]


# --- signaling phase -----------------------------------------------------------


def test_signaling_honest_copies_equal():
    caller, callee = signaled()
    assert payloads(caller.sent) == payloads(callee.received)
    assert payloads(callee.sent) == payloads(caller.received)
    assert [m.seq for m in caller.sent.messages] == [0, 2, 4]
    assert [m.seq for m in callee.sent.messages] == [1, 3, 5]
    assert caller.peer_ident == callee.ident


def test_signaling_tamper_changes_received_copy_only():
    caller, callee = signaled(script=AttackScript((TamperSignaling(seq=2, offset=0, xor=0xFF),)))
    sent, got = caller.sent.messages, callee.received.messages
    diffs = [m.seq for m, r in zip(sent, got) if m.payload != r.payload]
    assert diffs == [2]
    assert got[1].payload[0] == sent[1].payload[0] ^ 0xFF
    assert payloads(callee.sent) == payloads(caller.received)


def test_tamper_out_of_range():
    with pytest.raises(ConfigError):
        signaled(script=AttackScript((TamperSignaling(seq=6),)))


def test_empty_signaling_rejected_at_media_start():
    caller, callee = signaled(SessionConfig(message_count=0))
    with pytest.raises(SetupError):
        Simulation(caller, callee)


def test_config_mismatch_is_setup_error():
    caller, _ = signaled()
    _, other = signaled(SessionConfig(channel=ChannelConfig(capacity=30)))
    with pytest.raises(SetupError):
        Simulation(caller, other)
    _, other = signaled(SessionConfig(options=TokenOptions(password=b"x")))
    with pytest.raises(SetupError):
        Simulation(caller, other)


# --- replay guard --------------------------------------------------------------


def test_replay_guard_rule():
    seen = set()
    t = Token(b"\x00" * 32, 9)
    assert replay_guard(seen, t, Outcome.MATCH) is Outcome.MATCH
    assert seen == {9}
    assert replay_guard(seen, t, Outcome.MATCH) is Outcome.MISMATCH
    assert replay_guard(set(), t, Outcome.MISMATCH) is Outcome.MISMATCH


# --- conversation --------------------------------------------------------------


def test_honest_call_completes():
    r = run_session(SessionConfig())
    assert r.status is Status.COMPLETED
    for log in r.directions.values():
        assert log.mismatched == 0 and log.no_token == 0
        assert log.states[-1].lot >= 5
        assert log.sent == log.recovered == log.matched == 9  # floor(60 * 48 / 312)


@pytest.mark.parametrize("seq", range(6))
def test_any_tamper_is_seen_in_its_direction(seq):
    r = run_session(SessionConfig(), script=AttackScript((TamperSignaling(seq),)))
    hit, clean = ("ab", "ba") if seq % 2 == 0 else ("ba", "ab")
    assert r.directions[hit].mismatched >= 1
    assert r.directions[clean].mismatched == 0


def test_tamper_detection_latency():
    cfg = SessionConfig(message_count=2)
    r = run_session(cfg, script=AttackScript((TamperSignaling(0),)))
    assert r.status is Status.STOPPED_CRITICAL
    assert r.stopped_direction == "ab"
    assert r.detection_latency_s == pytest.approx(4 * 312 / 48)
    assert [e.outcome for e in r.directions["ab"].events] == [Outcome.MISMATCH] * 4


def test_strip_whole_call_times_out():
    r = run_session(SessionConfig(), script=AttackScript((StripWatermark(0, 59),)))
    assert r.status is Status.STOPPED_TIMEOUT
    assert 3 * 6.5 < r.end_time_s <= 4 * 6.5


def test_warmup_verifies_before_conversation():
    cfg = SessionConfig(warmup_seconds=312 / 48)
    r = run_session(cfg)
    assert r.warmup_s == 7.0
    for log in r.directions.values():
        assert log.first_match_s is not None and log.first_match_s <= r.warmup_s
    assert r.status is Status.COMPLETED


def test_warmup_zero_is_noop():
    caller, callee = signaled()
    sim = Simulation(caller, callee)
    sim.run_preconversation(0)
    assert sim.segment == 0 and caller.tx.tx_offset == 0


def test_warmup_stripping_accrues_timer():
    caller, callee = signaled()
    sim = Simulation(caller, callee, script=AttackScript((StripWatermark(0, 20),)))
    sim.run_preconversation(13)  # two slots
    assert callee.lot.timer == 2 and caller.lot.timer == 2
    assert callee.lot.running


def test_replay_is_rejected_and_stops():
    cfg = SessionConfig(critical_a=2, timer_limit_slots=8)
    r = run_session(cfg, script=AttackScript((ReplayTokens(from_slot=3),)))
    assert r.status is Status.STOPPED_CRITICAL
    outs = [e.outcome for e in r.directions["ab"].events]
    assert outs[:3] == [Outcome.MATCH] * 3
    assert set(outs[3:]) == {Outcome.MISMATCH}


def test_replay_without_guard_goes_unnoticed():
    # the replayed frame is a valid token for the last (repeated) message
    cfg = SessionConfig(critical_a=2, timer_limit_slots=8, replay_guard=False)
    r = run_session(cfg, script=AttackScript((ReplayTokens(from_slot=3),)))
    assert r.status is Status.COMPLETED
    assert r.directions["ab"].mismatched == 0


def test_voice_substitution_needs_voice_protection():
    script = AttackScript((SubstituteVoice(10, 59),))
    base = SessionConfig(critical_a=2, timer_limit_slots=8)
    on = run_session(dataclasses.replace(base, options=TokenOptions(protect_voice=True)), script=script)
    off = run_session(base, script=script)
    assert on.status is Status.STOPPED_CRITICAL
    assert off.status is Status.COMPLETED and off.directions["ab"].mismatched == 0
    first_bad = next(i for i, e in enumerate(on.directions["ab"].events) if e.outcome is Outcome.MISMATCH)
    # within one segment of pipeline delay plus one slot from the attack onset
    assert (first_bad + 1) * 6.5 <= 10 + 1 + 6.5 + 6.5


def test_voice_protection_honest():
    r = run_session(SessionConfig(options=TokenOptions(protect_voice=True, ts=1_160_000_000_000, password=b"pw")))
    assert r.status is Status.COMPLETED
    assert all(l.mismatched == 0 for l in r.directions.values())


def test_null_codec_times_out():
    r = run_session(SessionConfig(channel=ChannelConfig(codec_id="null_passthrough")))
    assert r.status is Status.STOPPED_TIMEOUT
    assert r.directions["ab"].recovered == 0


def test_counts_invariant_under_impairments():
    r = run_session(SessionConfig(duration_seconds=120, timer_limit_slots=50, critical_a=1, initial_x=40),
                    ChannelModel(ber=2e-3, segment_loss=0.05, seed=3))
    for log in r.directions.values():
        assert log.matched + log.mismatched <= log.recovered <= log.sent
        assert log.no_token >= 1


def test_deterministic_reports():
    cfg = SessionConfig(options=TokenOptions(protect_voice=True), seed=4)
    model = ChannelModel(ber=1e-3, segment_loss=0.02, seed=9)
    a = run_session(cfg, model)
    b = run_session(cfg, model)
    assert a.to_json() == b.to_json()
    assert a.trace_text("ab") == b.trace_text("ab")


def test_different_seed_changes_nonces():
    a, _ = signaled(SessionConfig(seed=1))
    b, _ = signaled(SessionConfig(seed=2))
    assert a.nonce_gen.offset != b.nonce_gen.offset


def test_wav_voice_pads_with_silence():
    import numpy as np
    from voipmark.session_sim import WavVoice

    v = WavVoice(np.arange(10, dtype=np.int16))
    assert list(v.segment(0, 6, 8000)) == [0, 1, 2, 3, 4, 5]
    assert list(v.segment(1, 6, 8000)) == [6, 7, 8, 9, 0, 0]
    assert not v.segment(5, 6, 8000).any()


@pytest.mark.parametrize("capacity,digest_bits,duration", [(30, 256, 60), (48, 256, 60), (1, 32, 352)])
def test_honest_completeness_per_regime(capacity, digest_bits, duration):
    cfg = SessionConfig(
        hash_spec=HashSpec("sha256", digest_bits),
        channel=ChannelConfig(capacity=capacity),
        duration_seconds=duration,
    )
    r = run_session(cfg, voice_caller=GeneratedVoice(1), voice_callee=GeneratedVoice(2))
    assert r.status is Status.COMPLETED
    for log in r.directions.values():
        assert log.sent > 0
        assert log.sent == log.recovered == log.matched
