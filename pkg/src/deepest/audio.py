"""16-bit PCM WAV reading/writing on top of the stdlib wave module."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import SampleRateMismatch, UnreadableAudio

TARGET_RATE = 16000
_INT16_FULL_SCALE = 32768.0


def read_wav(path: str | Path, expect_rate: int | None = None) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit PCM WAV file.

    Returns (samples, rate) with samples as float64 in [-1, 1).
    Raises UnreadableAudio for files that are not mono 16-bit PCM and
    SampleRateMismatch when ``expect_rate`` is given and differs.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as exc:
        raise UnreadableAudio(f"{path}: {exc}") from exc
    if sampwidth != 2:
        raise UnreadableAudio(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    if n_channels != 1:
        raise UnreadableAudio(f"{path}: expected mono, got {n_channels} channels")
    if expect_rate is not None and rate != expect_rate:
        raise SampleRateMismatch(f"{path}: found {rate} Hz, expected {expect_rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _INT16_FULL_SCALE
    return samples, rate


def wav_header_info(path: str | Path) -> tuple[int, int, float]:
    """Return (rate, n_frames, duration_s) without decoding samples."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            rate = wf.getframerate()
            n = wf.getnframes()
            if wf.getsampwidth() != 2 or wf.getnchannels() != 1:
                raise UnreadableAudio(f"{path}: not mono 16-bit PCM")
    except (wave.Error, EOFError, OSError) as exc:
        raise UnreadableAudio(f"{path}: {exc}") from exc
    return rate, n, n / float(rate)


def write_wav(path: str | Path, samples: np.ndarray, rate: int = TARGET_RATE) -> None:
    """Write float samples (clipped to [-1, 1]) as mono 16-bit PCM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = (clipped * (_INT16_FULL_SCALE - 1)).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())
