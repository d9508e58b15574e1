"""Level-of-Trust verifier.

Every slot the verifier compares one received token with the locally
computed one.  A match raises LoT by one and resets the inactivity timer; a
mismatch lowers LoT by one.  The call stops once LoT falls to the critical
level or the timer exceeds its limit.  When LoT climbs to
``critical_a * initial_x`` it is pulled back to ``initial_x``.

The timer is kept in slots; ``LotConfig.slot_duration`` converts to seconds.

Trace file format (CSV, one row per state)::

    # key=value metadata lines
    slot,outcome,lot,timer,status
    -,init,5,0,running
    0,match,6,0,running
    ...
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .errors import ConfigError, ContractError, TerminalStateError


class Status(enum.Enum):
    RUNNING = "running"
    STOPPED_CRITICAL = "stopped_critical"
    STOPPED_TIMEOUT = "stopped_timeout"
    COMPLETED = "completed"


class Outcome(enum.Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    NO_TOKEN = "no_token"


@dataclass(frozen=True)
class LotConfig:
    initial_x: int = 5
    critical_a: int = 1
    timer_limit_slots: int = 3
    slot_duration: float = 1.0

    def validate(self) -> None:
        if self.critical_a < 1:
            raise ConfigError(f"critical level must be >= 1, got {self.critical_a}")
        if self.initial_x <= self.critical_a:
            raise ConfigError(
                f"initial LoT {self.initial_x} must exceed critical level {self.critical_a}"
            )
        if self.timer_limit_slots < 0:
            raise ConfigError("timer limit must be non-negative")
        if self.slot_duration <= 0:
            raise ConfigError("slot duration must be positive")

    @property
    def cap_enabled(self) -> bool:
        # with a == 1 the cap a*x == x would fire on every return to x
        return self.critical_a > 1

    @property
    def cap_value(self) -> int:
        return self.critical_a * self.initial_x

    @property
    def timer_limit_k(self) -> float:
        return self.timer_limit_slots * self.slot_duration


@dataclass(frozen=True)
class LotState:
    lot: int
    timer: int = 0  # slots since the last match
    slot_index: int = 0
    status: Status = Status.RUNNING

    def timer_seconds(self, cfg: LotConfig) -> float:
        return self.timer * cfg.slot_duration

    @property
    def running(self) -> bool:
        return self.status is Status.RUNNING


@dataclass(frozen=True)
class SlotEvent:
    slot_index: int
    outcome: Outcome


def lot_init(cfg: LotConfig) -> LotState:
    cfg.validate()
    return LotState(lot=cfg.initial_x)


def lot_step(st: LotState, ev: SlotEvent, cfg: LotConfig) -> LotState:
    if not st.running:
        raise TerminalStateError(f"verifier already {st.status.value}")
    if ev.slot_index != st.slot_index:
        raise ContractError(f"expected event for slot {st.slot_index}, got {ev.slot_index}")

    lot, timer = st.lot, st.timer
    if ev.outcome is Outcome.MATCH:
        lot, timer = lot + 1, 0
    elif ev.outcome is Outcome.MISMATCH:
        lot, timer = lot - 1, timer + 1
    else:
        timer += 1

    status = Status.RUNNING
    if lot <= cfg.critical_a:
        status = Status.STOPPED_CRITICAL
    elif timer > cfg.timer_limit_slots:
        status = Status.STOPPED_TIMEOUT
    elif cfg.cap_enabled and lot == cfg.cap_value:
        lot = cfg.initial_x
    return LotState(lot, timer, st.slot_index + 1, status)


def lot_finish(st: LotState) -> LotState:
    """Mark end of transmission; stopped states are left alone."""
    return replace(st, status=Status.COMPLETED) if st.running else st


def lot_trace(events: Iterable[SlotEvent], cfg: LotConfig) -> list[LotState]:
    states = [lot_init(cfg)]
    for ev in events:
        if not states[-1].running:
            break
        states.append(lot_step(states[-1], ev, cfg))
    return states


TRACE_COLUMNS = ("slot", "outcome", "lot", "timer", "status")


@dataclass(frozen=True)
class TraceRow:
    slot: Optional[int]  # None for the initial state
    outcome: Optional[Outcome]
    lot: int
    timer: int
    status: Status


def trace_rows(events: list[SlotEvent], states: list[LotState]) -> list[TraceRow]:
    rows = [TraceRow(None, None, states[0].lot, states[0].timer, states[0].status)]
    for ev, st in zip(events, states[1:]):
        rows.append(TraceRow(ev.slot_index, ev.outcome, st.lot, st.timer, st.status))
    return rows


def format_trace(rows: list[TraceRow], meta: Optional[dict] = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in rows:
        writer.writerow([
            "-" if r.slot is None else r.slot,
            "init" if r.outcome is None else r.outcome.value,
            r.lot,
            r.timer,
            r.status.value,
        ])
    return buf.getvalue()


def parse_trace(text: str) -> tuple[dict, list[TraceRow]]:
    """Inverse of :func:`format_trace`; raises ContractError on malformed input."""
    meta: dict[str, str] = {}
    body = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ContractError(f"line {lineno}: metadata line needs key=value")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append((lineno, line))
    if not body:
        raise ContractError("trace has no header row")
    header_no, header = body[0]
    if tuple(c.strip() for c in header.split(",")) != TRACE_COLUMNS:
        raise ContractError(f"line {header_no}: expected header {','.join(TRACE_COLUMNS)}")
    rows = []
    for lineno, line in body[1:]:
        fields = next(csv.reader([line]))
        if len(fields) != len(TRACE_COLUMNS):
            raise ContractError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(fields)}")
        slot, outcome, lot, timer, status = (f.strip() for f in fields)
        try:
            rows.append(TraceRow(
                None if slot == "-" else int(slot),
                None if outcome == "init" else Outcome(outcome),
                int(lot),
                int(timer),
                Status(status),
            ))
        except ValueError as exc:
            raise ContractError(f"line {lineno}: {exc}") from exc
    if not rows or rows[0].slot is not None:
        raise ContractError("trace must start with the initial state row")
    return meta, rows
