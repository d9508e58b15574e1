"""Command line front end.

Exit codes for ``run``: 0 completed, 10 stopped at critical LoT,
11 stopped on timer expiry, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ContractError, VoipmarkError
from .lot_verifier import Outcome, Status, parse_trace
from .scenario import load_scenario_file
from .session_sim import Simulation, make_endpoints, run_signaling_phase
from .token_core import NONCE_SPACE, Token
from .voice_features import AudioSegment
from .watermark_channel import BitstreamCursor, ChannelConfig, embed, extract, frame_token
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CRITICAL = 10
EXIT_TIMEOUT = 11

STATUS_EXIT = {
    Status.COMPLETED: EXIT_OK,
    Status.STOPPED_CRITICAL: EXIT_CRITICAL,
    Status.STOPPED_TIMEOUT: EXIT_TIMEOUT,
}


def cmd_run(args) -> int:
    sc = load_scenario_file(args.scenario)
    out = Path(args.out) if args.out else sc.output_dir
    cfg = sc.session
    caller, callee = make_endpoints(cfg)
    run_signaling_phase(caller, callee, sc.script, cfg.message_count, cfg.seed)
    sim = Simulation(caller, callee, sc.channel_model, sc.script, cfg.replay_guard)
    sim.run_preconversation(cfg.warmup_seconds)
    report = sim.run_conversation(sc.voice_caller, sc.voice_callee, cfg.duration_seconds)

    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    for d in report.directions:
        (out / f"trace_{d}.csv").write_text(report.trace_text(d))

    print(f"scenario: {sc.name}")
    print(f"status: {report.status.value}"
          + (f" ({report.stopped_direction} at {report.end_time_s:g} s)" if report.stopped_direction else ""))
    if report.detection_latency_s is not None:
        print(f"detection latency: {report.detection_latency_s:g} s")
    for d, log in report.directions.items():
        print(f"{d}: sent={log.sent} recovered={log.recovered} matched={log.matched} "
              f"mismatched={log.mismatched} lot={log.states[-1].lot}")
    print(f"report: {out / 'report.json'}")
    return STATUS_EXIT[report.status]


def _channel_from_args(args, sample_rate: int) -> ChannelConfig:
    return ChannelConfig(
        capacity=args.capacity,
        embed_depth=args.depth,
        sample_rate=sample_rate,
        codec_id=args.codec,
        segment_seconds=args.segment_seconds,
    )


def read_token_spec(path) -> list[Token]:
    """One token per line: ``<digest hex> <nonce hex>``; ``#`` comments."""
    tokens = []
    width = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        try:
            if len(parts) != 2:
                raise ValueError("expected '<digest hex> <nonce hex>'")
            digest = bytes.fromhex(parts[0])
            nonce = int(parts[1], 16)
            if not digest or not 0 <= nonce < NONCE_SPACE:
                raise ValueError("empty digest or nonce outside 32 bits")
        except ValueError as exc:
            raise ContractError(f"{path}:{lineno}: {exc}") from exc
        if width is not None and len(digest) != width:
            raise ContractError(f"{path}:{lineno}: digest width differs from earlier tokens")
        width = len(digest)
        tokens.append(Token(digest, nonce))
    return tokens


def cmd_embed(args) -> int:
    samples, rate = read_wav(args.wav_in)
    cfg = _channel_from_args(args, rate)
    tokens = read_token_spec(args.tokens)
    cursor = BitstreamCursor(len(tokens[0].digest) * 8 if tokens else 256)
    for t in tokens:
        cursor.push_frame(frame_token(t))
    n = cfg.segment_samples
    n_segments = len(samples) // n
    need = len(cursor.pending)
    if need > n_segments * cfg.bits_per_segment:
        raise ContractError(
            f"{need} bits do not fit: {n_segments} segments carry {n_segments * cfg.bits_per_segment} bits"
        )
    out = np.array(samples, copy=True)
    for i in range(n_segments):
        marked, _ = embed(AudioSegment(samples[i * n : (i + 1) * n], rate, i), cursor, cfg)
        out[i * n : (i + 1) * n] = marked.samples
    write_wav(args.wav_out, out, rate)
    print(f"embedded {len(tokens)} token(s), {need} bits in {n_segments} segment(s) -> {args.wav_out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    samples, rate = read_wav(args.wav_in)
    cfg = _channel_from_args(args, rate)
    cursor = BitstreamCursor(args.digest_bits)
    n = cfg.segment_samples
    found = []
    for i in range(len(samples) // n):
        recovered, _ = extract(AudioSegment(samples[i * n : (i + 1) * n], rate, i), cursor, cfg)
        found.extend(recovered)
    for rec in found:
        print(rec.token.hex())
    print(f"# tokens={len(found)} dropped_frames={cursor.dropped_frames}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        raise ContractError(f"{args.trace}: {exc.strerror}") from exc
    meta, rows = parse_trace(text)
    slot_s = float(meta["slot_duration"]) if "slot_duration" in meta else None
    title = f"LoT trace {meta.get('direction', '')}".rstrip()
    print(title)
    print(f"{'slot':>5} {'time_s':>9} {'outcome':<9} {'lot':>4} {'timer':>5}  status")
    for r in rows:
        slot = "-" if r.slot is None else str(r.slot)
        t = 0.0 if r.slot is None else ((r.slot + 1) * slot_s if slot_s else None)
        ts = "" if t is None else f"{t:.2f}"
        outcome = "init" if r.outcome is None else r.outcome.value
        print(f"{slot:>5} {ts:>9} {outcome:<9} {r.lot:>4} {r.timer:>5}  {r.status.value}")
    counts = {o: sum(1 for r in rows if r.outcome is o) for o in Outcome}
    print(f"termination: {rows[-1].status.value}")
    print(f"slots: {len(rows) - 1} matched={counts[Outcome.MATCH]} "
          f"mismatched={counts[Outcome.MISMATCH]} no_token={counts[Outcome.NO_TOKEN]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voipmark", description="Watermark-carried call authentication simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.set_defaults(func=cmd_run)

    def channel_flags(sp):
        sp.add_argument("--capacity", type=int, default=48, help="bits per second (default 48)")
        sp.add_argument("--depth", type=int, default=1, help="embedding depth in bits (default 1)")
        sp.add_argument("--codec", default="lsb_reference")
        sp.add_argument("--segment-seconds", type=float, default=1.0)

    emb = sub.add_parser("embed", help="embed tokens into a WAV file")
    emb.add_argument("wav_in")
    emb.add_argument("tokens", help="token list: '<digest hex> <nonce hex>' per line")
    emb.add_argument("wav_out")
    channel_flags(emb)
    emb.set_defaults(func=cmd_embed)

    ext = sub.add_parser("extract", help="list tokens found in a WAV file")
    ext.add_argument("wav_in")
    ext.add_argument("--digest-bits", type=int, default=256)
    channel_flags(ext)
    ext.set_defaults(func=cmd_extract)

    rep = sub.add_parser("report", help="summarize a LoT trace file")
    rep.add_argument("trace")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VoipmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
