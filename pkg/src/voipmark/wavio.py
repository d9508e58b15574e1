"""16-bit mono PCM WAV reading and writing (canonical RIFF/WAVE header)."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import FormatError


def read_wav(path) -> tuple[np.ndarray, int]:
    """Return ``(samples, sample_rate)`` with samples as int16."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono, found {w.getnchannels()} channels")
            if w.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit samples, found {8 * w.getsampwidth()}-bit")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a PCM WAV file ({exc})") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV file") from exc
    return np.frombuffer(raw, dtype="<i2").astype(np.int16), rate


def write_wav(path, samples, sample_rate: int = 8000) -> None:
    data = np.asarray(samples)
    if data.ndim != 1:
        raise FormatError("only mono audio can be written")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(data.astype("<i2").tobytes())
