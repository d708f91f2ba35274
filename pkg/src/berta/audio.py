"""Audio container probing and duration measurement.

PCM16 WAV is the mandatory upload format; duration is read from the container
header rather than trusted from the client.
"""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass

from .errors import EmptyAudio, UnsupportedMedia


@dataclass(frozen=True)
class AudioInfo:
    duration_s: float
    sample_rate_hz: int
    channels: int
    media_format: str


def probe_wav(data: bytes) -> AudioInfo:
    if not data:
        raise EmptyAudio("zero-length upload")
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnsupportedMedia("not a RIFF/WAVE container")
    try:
        with wave.open(io.BytesIO(data)) as wf:
            frames = wf.getnframes()
            rate = wf.getframerate()
            channels = wf.getnchannels()
            width = wf.getsampwidth()
    except wave.Error as exc:
        raise UnsupportedMedia(str(exc)) from exc
    if width != 2:
        raise UnsupportedMedia(f"only PCM16 accepted, got sample width {width}")
    if rate <= 0:
        raise UnsupportedMedia("invalid sample rate")
    duration = frames / rate
    if duration <= 0:
        raise EmptyAudio("recording has zero duration")
    return AudioInfo(duration_s=duration, sample_rate_hz=rate, channels=channels, media_format="wav")


def probe(data: bytes, media_format: str = "wav") -> AudioInfo:
    if media_format.lower() not in ("wav", "wave", "audio/wav", "audio/x-wav"):
        raise UnsupportedMedia(f"media format {media_format!r} not accepted")
    return probe_wav(data)


def make_wav(duration_s: float, sample_rate_hz: int = 16000, fill: int = 0) -> bytes:
    """Synthesize a silent PCM16 mono WAV; used by fixtures and the demo seed."""
    frames = int(round(duration_s * sample_rate_hz))
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate_hz)
        wf.writeframes(fill.to_bytes(2, "little", signed=True) * frames)
    return buf.getvalue()
