import re
import wave
from pathlib import Path

import numpy as np
import pytest

from voipmark.cli import main
from voipmark.errors import ConfigError, FormatError
from voipmark.scenario import load_scenario, load_scenario_file
from voipmark.session_sim import GeneratedVoice, ReplayTokens, TamperSignaling, WavVoice
from voipmark.wavio import read_wav, write_wav

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def expected_exit(path):
    m = re.search(r"#\s*expect-exit:\s*(\d+)", path.read_text())
    return int(m.group(1))


# --- wav ----------------------------------------------------------------------


def test_wav_roundtrip(tmp_path):
    x = np.array([0, 1, -1, 32767, -32768, 1234], dtype=np.int16)
    write_wav(tmp_path / "a.wav", x, 8000)
    y, rate = read_wav(tmp_path / "a.wav")
    assert rate == 8000 and np.array_equal(x, y)
    assert (tmp_path / "a.wav").stat().st_size == 44 + 2 * len(x)


def test_wav_rejects_stereo_and_8bit(tmp_path):
    for name, ch, width in (("st.wav", 2, 2), ("b8.wav", 1, 1)):
        with wave.open(str(tmp_path / name), "wb") as w:
            w.setnchannels(ch)
            w.setsampwidth(width)
            w.setframerate(8000)
            w.writeframes(b"\x00" * 16)
        with pytest.raises(FormatError):
            read_wav(tmp_path / name)
    (tmp_path / "junk.wav").write_bytes(b"RIFF....WAVEjunk")
    with pytest.raises(FormatError):
        read_wav(tmp_path / "junk.wav")


# --- scenario parsing ---------------------------------------------------------


def test_scenario_defaults():
    sc = load_scenario("")
    s = sc.session
    assert (s.channel.capacity, s.hash_spec.digest_bits, s.initial_x, s.critical_a) == (48, 256, 5, 1)
    assert s.timer_limit_slots == 3 and s.message_count == 6
    assert s.options.ts is None and s.options.password is None
    assert sc.script.actions == ()


def test_scenario_attacks_and_options():
    sc = load_scenario(
        "password = pw\nts = 17\nattack = tamper_signaling seq=2 xor=0x0f\n"
        "attack = replay_tokens from_slot=4 direction=ba\n"
    )
    assert sc.session.options.password == b"pw" and sc.session.options.ts == 17
    assert sc.script.actions == (TamperSignaling(2, 0, 0x0F), ReplayTokens(4, "ba"))


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("VOIPMARK_SEED", "99")
    assert load_scenario("").session.seed == 99
    assert load_scenario("seed = 3").session.seed == 3


@pytest.mark.parametrize("text,line", [
    ("capacity = 48\nbogus = 1\n", 2),
    ("capacity\n", 1),
    ("\n\ncapacity = fast\n", 3),
    ("initial_x = 2\ncritical_a = 2\n", 1),
    ("attack = teleport x=1\n", 1),
    ("attack = tamper_signaling\n", 1),
    ("capacity = 48\ncapacity = 30\n", 2),
    ("ber = 2\n", None),
    ("message_count = 1\n", 1),
])
def test_scenario_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as exc:
        load_scenario(text, "s.scn")
    if line is not None:
        assert f"s.scn:{line}" in str(exc.value)


def test_scenario_wav_voice(tmp_path):
    write_wav(tmp_path / "v.wav", np.ones(100, dtype=np.int16), 8000)
    (tmp_path / "s.scn").write_text("voice_caller = v.wav\n")
    sc = load_scenario_file(tmp_path / "s.scn")
    assert isinstance(sc.voice_caller, WavVoice) and isinstance(sc.voice_callee, GeneratedVoice)
    write_wav(tmp_path / "w.wav", np.ones(100, dtype=np.int16), 16000)
    (tmp_path / "t.scn").write_text("voice_caller = w.wav\n")
    with pytest.raises(ConfigError):
        load_scenario_file(tmp_path / "t.scn")


# --- run ----------------------------------------------------------------------


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
def test_bundled_scenarios_exit_codes(path, tmp_path, capsys):
    assert main(["run", str(path), "--out", str(tmp_path)]) == expected_exit(path)
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "trace_ab.csv").exists() and (tmp_path / "trace_ba.csv").exists()


def test_tamper_report_has_latency(tmp_path, capsys):
    assert main(["run", str(SCENARIOS / "tamper.scn"), "--out", str(tmp_path)]) == 10
    assert "detection latency: 26 s" in capsys.readouterr().out
    assert '"detection_latency_s": 26.0' in (tmp_path / "report.json").read_text()


def test_malformed_scenario_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("capacity = 48\nthis is not valid\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "bad.scn:2" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.scn")]) == 2


# --- embed / extract ----------------------------------------------------------


@pytest.fixture
def test_wav(tmp_path):
    voice = GeneratedVoice(seed=5)
    samples = np.concatenate([voice.segment(i, 8000, 8000) for i in range(20)])
    path = tmp_path / "in.wav"
    write_wav(path, samples, 8000)
    return path


@pytest.fixture
def token_file(tmp_path):
    rng = np.random.default_rng(0)
    lines = [f"{rng.bytes(32).hex()} {int(rng.integers(0, 1 << 32)):08x}" for _ in range(3)]
    path = tmp_path / "tokens.txt"
    path.write_text("# digest nonce\n" + "\n".join(lines) + "\n")
    return path, lines


def test_embed_extract_roundtrip(test_wav, token_file, tmp_path, capsys):
    path, lines = token_file
    out = tmp_path / "marked.wav"
    assert main(["embed", str(test_wav), str(path), str(out)]) == 0
    capsys.readouterr()
    assert main(["extract", str(out)]) == 0
    res = capsys.readouterr()
    assert res.out.splitlines() == lines
    assert "dropped_frames=0" in res.err


def test_extract_unmarked(test_wav, capsys):
    assert main(["extract", str(test_wav)]) == 0
    res = capsys.readouterr()
    assert res.out == "" and "tokens=0" in res.err


def test_corrupted_carrier_bit_drops_frame(test_wav, token_file, tmp_path, capsys):
    path, lines = token_file
    out = tmp_path / "marked.wav"
    main(["embed", str(test_wav), str(path), str(out)])
    samples, rate = read_wav(out)
    samples = samples.copy()
    # stream bit 312 + 50 sits in segment 7 at carrier (362 - 336) * 166
    samples[7 * 8000 + (362 - 7 * 48) * 166] ^= 1
    write_wav(out, samples, rate)
    capsys.readouterr()
    main(["extract", str(out)])
    res = capsys.readouterr()
    assert res.out.splitlines() == [lines[0], lines[2]]
    assert "dropped_frames=1" in res.err


def test_embed_rejects_stereo_and_overflow(tmp_path, token_file, capsys):
    path, _ = token_file
    with wave.open(str(tmp_path / "st.wav"), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(8000)
        w.writeframes(b"\x00" * 64000)
    assert main(["embed", str(tmp_path / "st.wav"), str(path), str(tmp_path / "o.wav")]) == 2
    write_wav(tmp_path / "short.wav", np.zeros(8000 * 3, dtype=np.int16))
    assert main(["embed", str(tmp_path / "short.wav"), str(path), str(tmp_path / "o.wav")]) == 2


def test_bad_token_spec(tmp_path, test_wav):
    (tmp_path / "t.txt").write_text("zz 12\n")
    assert main(["embed", str(test_wav), str(tmp_path / "t.txt"), str(tmp_path / "o.wav")]) == 2


# --- report -------------------------------------------------------------------


def test_report_honest(tmp_path, capsys):
    main(["run", str(SCENARIOS / "honest.scn"), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["report", str(tmp_path / "trace_ab.csv")]) == 0
    out = capsys.readouterr().out
    assert "termination: completed" in out and "mismatched=0" in out


def test_report_critical_counts(tmp_path, capsys):
    main(["run", str(SCENARIOS / "tamper.scn"), "--out", str(tmp_path)])
    capsys.readouterr()
    main(["report", str(tmp_path / "trace_ab.csv")])
    out = capsys.readouterr().out
    assert "termination: stopped_critical" in out and "mismatched=4" in out  # x - a


def test_report_initial_only(tmp_path, capsys):
    p = tmp_path / "t.csv"
    p.write_text("slot,outcome,lot,timer,status\n-,init,5,0,running\n")
    assert main(["report", str(p)]) == 0
    out = capsys.readouterr().out
    assert "slots: 0" in out and "termination: running" in out


def test_report_malformed(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("what,is,this\n")
    assert main(["report", str(p)]) == 2
    assert main(["report", str(tmp_path / "nope.csv")]) == 2
