"""Uniform transcription interface over interchangeable speech-to-text backends.

Three backend kinds:

* ``mock`` — reads a sidecar text file keyed by the audio content hash, so the
  whole pipeline is deterministic under test; without a sidecar it derives a
  stable placeholder text from the hash.
* ``http_transcription`` — multipart upload (file + model fields) to a server
  speaking the common open-transcription JSON protocol.
* ``local_engine`` — invokes a configured executable with input/output file
  paths and parses its JSON output.

Lexicon substitution runs as post-processing on every returned transcript.
"""

from __future__ import annotations

import hashlib
import json
import re
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import httpx

from . import model
from .errors import BackendRejected, BackendUnavailable, EmptyAudio

WORD_RE = re.compile(r"\w+|\W+", re.UNICODE)


@dataclass(frozen=True)
class AsrBackendDescriptor:
    backend_id: str
    kind: str  # mock | http_transcription | local_engine
    model_id: str
    endpoint: Optional[str] = None
    timeout_s: float = 30.0
    max_retries: int = 2
    backoff_base_s: float = 0.5
    concurrency_cap: int = 4
    sidecar_dir: Optional[str] = None  # mock only
    command: Optional[str] = None  # local_engine only

    def check(self) -> List[str]:
        problems = []
        if self.kind not in ("mock", "http_transcription", "local_engine"):
            problems.append(f"unknown backend kind {self.kind!r}")
        if (self.kind == "http_transcription") != (self.endpoint is not None):
            problems.append("endpoint required iff kind is http_transcription")
        if self.timeout_s <= 0:
            problems.append("timeout_s must be positive")
        return problems


@dataclass(frozen=True)
class VocabularyLexicon:
    entries: Tuple[Tuple[str, str], ...] = ()

    def check(self) -> List[str]:
        problems = []
        seen = set()
        for surface, _canonical in self.entries:
            if not surface:
                problems.append("empty surface_form")
            low = surface.lower()
            if low in seen:
                problems.append(f"duplicate surface_form {surface!r}")
            seen.add(low)
        return problems


@dataclass(frozen=True)
class Health:
    healthy: bool
    reason: Optional[str] = None


# per-backend concurrent-request cap
_semaphores: Dict[str, threading.BoundedSemaphore] = {}
_sem_lock = threading.Lock()


def _backend_slot(backend_id: str, cap: int) -> threading.BoundedSemaphore:
    with _sem_lock:
        if backend_id not in _semaphores:
            _semaphores[backend_id] = threading.BoundedSemaphore(cap)
        return _semaphores[backend_id]


def _substitute_text(text: str, table: Dict[Tuple[str, ...], str]) -> str:
    """Greedy left-to-right whole-token match, longest surface form first.

    Replaced spans are not rescanned, so a single pass suffices.
    """
    if not table:
        return text
    max_len = max(len(k) for k in table)
    pieces = WORD_RE.findall(text)
    out: List[str] = []
    i = 0
    while i < len(pieces):
        if not pieces[i][0].isalnum() and pieces[i][0] != "_":
            out.append(pieces[i])
            i += 1
            continue
        matched = False
        # candidate token sequence: word pieces at i, i+2, i+4 ... with
        # single separators between them
        for n_words in range(max_len, 0, -1):
            end = i + 2 * (n_words - 1)
            if end >= len(pieces):
                continue
            words = tuple(pieces[j].lower() for j in range(i, end + 1, 2))
            if len(words) != n_words:
                continue
            # only plain single spaces may sit inside a multi-word form
            if n_words > 1 and any(pieces[j] != " " for j in range(i + 1, end, 2)):
                continue
            if words in table:
                out.append(table[words])
                i = end + 1
                matched = True
                break
        if not matched:
            out.append(pieces[i])
            i += 1
    return "".join(out)


def apply_lexicon(transcript: model.Transcript, lexicon: VocabularyLexicon) -> model.Transcript:
    """Replace whole-token, case-insensitive surface forms by canonical forms."""
    if not lexicon.entries:
        return transcript
    table: Dict[Tuple[str, ...], str] = {}
    for surface, canonical in lexicon.entries:
        key = tuple(w.lower() for w in surface.split())
        table[key] = canonical
    segments = tuple(
        model.Segment(
            start_s=s.start_s,
            end_s=s.end_s,
            text=_substitute_text(s.text, table),
            speaker_label=s.speaker_label,
        )
        for s in transcript.segments
    )
    return model.update(
        transcript,
        segments=segments,
        full_text=" ".join(s.text for s in segments),
    )


# ---------------------------------------------------------------------------
# Backends


def _mock_text(audio: bytes, backend: AsrBackendDescriptor) -> str:
    digest = hashlib.sha256(audio).hexdigest()
    if backend.sidecar_dir:
        sidecar = Path(backend.sidecar_dir) / f"{digest}.txt"
        if sidecar.exists():
            return sidecar.read_text(encoding="utf-8").strip()
    return f"simulated encounter transcript {digest[:12]}"


def _segments_from_text(text: str, duration_s: float) -> Tuple[model.Segment, ...]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()] or [""]
    step = duration_s / len(lines)
    return tuple(
        model.Segment(start_s=round(i * step, 3), end_s=round((i + 1) * step, 3), text=ln)
        for i, ln in enumerate(lines)
    )


def _transcribe_mock(recording, audio, backend) -> model.Transcript:
    text = _mock_text(audio, backend)
    segments = _segments_from_text(text, recording.duration_s)
    return model.Transcript(
        id=model.new_id(),
        recording_id=recording.id,
        segments=segments,
        full_text=" ".join(s.text for s in segments),
        language_tag="en",
        asr_backend_id=backend.backend_id,
        asr_model_id=backend.model_id,
        created_at=model.utc_now(),
    )


def _parse_remote_payload(recording, backend, payload: dict) -> model.Transcript:
    raw_segments = payload.get("segments") or []
    segments = []
    for seg in raw_segments:
        segments.append(
            model.Segment(
                start_s=float(seg.get("start", seg.get("start_s", 0.0))),
                end_s=float(seg.get("end", seg.get("end_s", 0.0))),
                text=str(seg.get("text", "")).strip(),
                speaker_label=seg.get("speaker"),
            )
        )
    if not segments:
        text = str(payload.get("text", "")).strip()
        segments = [model.Segment(start_s=0.0, end_s=recording.duration_s, text=text)]
    segments.sort(key=lambda s: s.start_s)
    # clamp the tail into the invariant envelope; remote timestamps can drift
    limit = recording.duration_s + 0.5
    segments = [
        model.Segment(s.start_s, min(s.end_s, limit), s.text, s.speaker_label)
        for s in segments
    ]
    return model.Transcript(
        id=model.new_id(),
        recording_id=recording.id,
        segments=tuple(segments),
        full_text=" ".join(s.text for s in segments),
        language_tag=str(payload.get("language", "en")),
        asr_backend_id=backend.backend_id,
        asr_model_id=backend.model_id,
        created_at=model.utc_now(),
    )


def _with_retries(backend, call, attempt_log: Optional[List[int]] = None):
    last_exc = None
    for attempt in range(1, backend.max_retries + 2):
        if attempt_log is not None:
            attempt_log.append(attempt)
        try:
            return call()
        except (httpx.TimeoutException, httpx.ConnectError, httpx.NetworkError) as exc:
            last_exc = exc
            if attempt <= backend.max_retries:
                time.sleep(backend.backoff_base_s * (2 ** (attempt - 1)))
    raise BackendUnavailable(
        f"{backend.backend_id}: {last_exc} after {backend.max_retries + 1} attempts"
    ) from last_exc


def _transcribe_http(recording, audio, backend, attempt_log) -> model.Transcript:
    def call():
        with httpx.Client(timeout=backend.timeout_s) as client:
            resp = client.post(
                backend.endpoint,
                files={"file": ("audio.wav", audio, "audio/wav")},
                data={"model": backend.model_id, "response_format": "verbose_json"},
            )
        if resp.status_code != 200:
            raise BackendRejected(f"{backend.backend_id}: HTTP {resp.status_code}: {resp.text[:500]}")
        return resp.json()
    payload = _with_retries(backend, call, attempt_log)
    return _parse_remote_payload(recording, backend, payload)


def _transcribe_local(recording, audio, backend) -> model.Transcript:
    if not backend.command:
        raise BackendRejected(f"{backend.backend_id}: no command configured")
    with tempfile.TemporaryDirectory() as tmp:
        in_path = Path(tmp) / "input.wav"
        out_path = Path(tmp) / "output.json"
        in_path.write_bytes(audio)
        proc = subprocess.run(
            [backend.command, str(in_path), str(out_path)],
            capture_output=True,
            timeout=backend.timeout_s,
        )
        if proc.returncode != 0:
            raise BackendRejected(
                f"{backend.backend_id}: exit {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}"
            )
        payload = json.loads(out_path.read_text(encoding="utf-8"))
    return _parse_remote_payload(recording, backend, payload)


def transcribe(
    recording: model.Recording,
    audio: bytes,
    backend: AsrBackendDescriptor,
    lexicon: Optional[VocabularyLexicon] = None,
    attempt_log: Optional[List[int]] = None,
) -> model.Transcript:
    """Transcribe one recording; lexicon substitutions are already applied."""
    if recording.duration_s <= 0 or not audio:
        raise EmptyAudio(f"recording {recording.id} has no audio")
    slot = _backend_slot(backend.backend_id, backend.concurrency_cap)
    with slot:
        if backend.kind == "mock":
            if attempt_log is not None:
                attempt_log.append(1)
            transcript = _transcribe_mock(recording, audio, backend)
        elif backend.kind == "http_transcription":
            transcript = _transcribe_http(recording, audio, backend, attempt_log)
        elif backend.kind == "local_engine":
            if attempt_log is not None:
                attempt_log.append(1)
            transcript = _transcribe_local(recording, audio, backend)
        else:
            raise BackendRejected(f"unknown backend kind {backend.kind!r}")
    if lexicon is not None:
        transcript = apply_lexicon(transcript, lexicon)
    return transcript


def health_check(backend: AsrBackendDescriptor) -> Health:
    if backend.kind == "mock":
        return Health(healthy=True)
    if backend.kind == "local_engine":
        if backend.command and Path(backend.command).exists():
            return Health(healthy=True)
        return Health(healthy=False, reason="command not found")
    try:
        with httpx.Client(timeout=backend.timeout_s) as client:
            resp = client.get(backend.endpoint)
        if resp.status_code < 500:
            return Health(healthy=True)
        return Health(healthy=False, reason=f"HTTP {resp.status_code}")
    except httpx.HTTPError as exc:
        return Health(healthy=False, reason=f"connection: {exc.__class__.__name__}")
