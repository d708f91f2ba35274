"""Core entity types, identifiers, lifecycle state machines, and canonical JSON.

All types are immutable values after construction; mutation is modelled by
replacing whole records through the persistence layer. Everything here is pure
and safe to call from any number of concurrent contexts.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

from .errors import DanglingReference, IllegalTransition

__all__ = [
    "Session",
    "Recording",
    "Transcript",
    "Segment",
    "Note",
    "NoteSection",
    "UserProfile",
    "Facility",
    "new_id",
    "utc_now",
    "next_state",
    "derive_session_status",
    "session_audio_seconds",
    "to_canonical_json",
    "entity_from_json",
    "RECORDING_TRANSITIONS",
    "NOTE_TRANSITIONS",
]

# 128-bit random ids rendered lowercase hex; ordering metadata lives in
# created_at, never in the id.


def new_id() -> str:
    return secrets.token_hex(16)


def utc_now() -> str:
    """Current UTC time as ISO-8601 with millisecond precision."""
    now = datetime.now(timezone.utc)
    return now.isoformat(timespec="milliseconds").replace("+00:00", "Z")


def parse_ts(ts: str) -> datetime:
    return datetime.fromisoformat(ts.replace("Z", "+00:00"))


@dataclass(frozen=True)
class Session:
    id: str
    owner_id: str
    facility_id: Optional[str]
    created_at: str
    recording_ids: Tuple[str, ...] = ()
    note_ids: Tuple[str, ...] = ()
    archived: bool = False

    store_kind = "session"


@dataclass(frozen=True)
class Recording:
    id: str
    session_id: str
    blob_ref: str
    duration_s: float
    sample_rate_hz: int
    media_format: str
    status: str
    created_at: str

    store_kind = "recording"


@dataclass(frozen=True)
class Segment:
    start_s: float
    end_s: float
    text: str
    speaker_label: Optional[str] = None


@dataclass(frozen=True)
class Transcript:
    id: str
    recording_id: str
    segments: Tuple[Segment, ...]
    full_text: str
    language_tag: str
    asr_backend_id: str
    asr_model_id: str
    created_at: str

    store_kind = "transcript"

    def check(self, recording_duration_s: Optional[float] = None) -> List[str]:
        """Return invariant violations (empty list when valid)."""
        problems = []
        prev_start = -1.0
        for seg in self.segments:
            if seg.start_s < prev_start:
                problems.append("segment start_s not monotone")
            if seg.end_s < seg.start_s:
                problems.append("segment end_s before start_s")
            prev_start = seg.start_s
        if recording_duration_s is not None and self.segments:
            if self.segments[-1].end_s > recording_duration_s + 0.5:
                problems.append("final end_s exceeds recording duration + 0.5 s")
        if self.full_text != " ".join(s.text for s in self.segments):
            problems.append("full_text is not the space-joined segment texts")
        return problems


@dataclass(frozen=True)
class NoteSection:
    title: str
    body: str


@dataclass(frozen=True)
class Note:
    id: str
    session_id: str
    template_id: str
    transcript_ids: Tuple[str, ...]
    sections: Tuple[NoteSection, ...]
    llm_backend_id: str
    llm_model_id: str
    token_usage: Tuple[int, int]  # (prompt_tokens, completion_tokens)
    status: str
    created_at: str
    edited_at: Optional[str] = None

    store_kind = "note"


@dataclass(frozen=True)
class UserProfile:
    id: str
    display_name: str
    role: str  # clinician | admin
    created_at: str

    store_kind = "user"


@dataclass(frozen=True)
class Facility:
    id: str
    name: str
    region_tag: str

    store_kind = "facility"


@dataclass(frozen=True)
class Job:
    id: str
    kind: str  # transcription | generation
    subject_id: str  # recording id or note id
    attempt: int
    state: str  # queued | running | done | failed
    enqueued_at: str
    finished_at: Optional[str] = None
    error: Optional[str] = None

    store_kind = "job"


# ---------------------------------------------------------------------------
# Lifecycle state machines

RECORDING_STATUSES = ("uploaded", "transcribing", "transcribed", "failed")
NOTE_STATUSES = ("generating", "draft", "edited", "finalized", "failed")

RECORDING_TRANSITIONS: Dict[Tuple[str, str], str] = {
    ("uploaded", "transcription_started"): "transcribing",
    ("transcribing", "transcription_succeeded"): "transcribed",
    ("transcribing", "transcription_failed"): "failed",
}

# Repeated edits of an already-edited note keep its status; they are content
# updates, not state transitions, so the table carries no self-loop.
NOTE_TRANSITIONS: Dict[Tuple[str, str], str] = {
    ("generating", "generation_succeeded"): "draft",
    ("generating", "generation_failed"): "failed",
    ("draft", "edit"): "edited",
    ("draft", "finalize"): "finalized",
    ("edited", "finalize"): "finalized",
}

_TABLES = {"recording": RECORDING_TRANSITIONS, "note": NOTE_TRANSITIONS}
_STATUSES = {"recording": RECORDING_STATUSES, "note": NOTE_STATUSES}


def next_state(entity_kind: str, current: str, event: str) -> str:
    """Successor status for a legal (current, event) pair.

    Raises IllegalTransition for any pair not in the table; the caller must
    not mutate state on that path.
    """
    if entity_kind not in _TABLES:
        raise ValueError(f"unknown entity kind {entity_kind!r}")
    if current not in _STATUSES[entity_kind]:
        raise ValueError(f"{current!r} is not a {entity_kind} status")
    table = _TABLES[entity_kind]
    key = (current, event)
    if key not in table:
        raise IllegalTransition(entity_kind, current, event)
    return table[key]


# ---------------------------------------------------------------------------
# Derived session status

NOTE_SUCCESS = frozenset({"draft", "edited", "finalized"})


def _resolve(store, kind: str, entity_id: str):
    try:
        return store.load_entity(kind, entity_id)
    except Exception as exc:
        raise DanglingReference(f"{kind} {entity_id}: {exc}") from exc


def _unsuperseded_failure(children, success_statuses) -> bool:
    """True iff some failed child has no later-created sibling that succeeded.

    A failed attempt is forgiven when a newer sibling succeeded; only the
    newest failure poisons the session.
    """
    for child in children:
        if child.status != "failed":
            continue
        key = (child.created_at, child.id)
        superseded = any(
            c.status in success_statuses and (c.created_at, c.id) > key
            for c in children
        )
        if not superseded:
            return True
    return False


def derive_session_status(session: Session, store) -> str:
    """Session status is derived, never stored.

    Clauses apply in order: empty, error, note_ready, transcribed, has_audio.
    """
    recordings = [_resolve(store, "recording", rid) for rid in session.recording_ids]
    notes = [_resolve(store, "note", nid) for nid in session.note_ids]
    if not recordings:
        return "empty"
    if _unsuperseded_failure(recordings, {"transcribed"}) or _unsuperseded_failure(
        notes, NOTE_SUCCESS
    ):
        return "error"
    if any(n.status in NOTE_SUCCESS for n in notes):
        return "note_ready"
    if any(r.status == "transcribed" for r in recordings):
        return "transcribed"
    return "has_audio"


def session_audio_seconds(session: Session, store) -> float:
    """Total recorded seconds across the session's recordings."""
    return sum(
        _resolve(store, "recording", rid).duration_s for rid in session.recording_ids
    )


# ---------------------------------------------------------------------------
# Canonical JSON serialization

_ENTITY_TYPES = {
    "session": Session,
    "recording": Recording,
    "transcript": Transcript,
    "note": Note,
    "user": UserProfile,
    "facility": Facility,
    "job": Job,
}


def _to_dict(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_to_dict(v) for v in value]
    if isinstance(value, (Segment, NoteSection)):
        return {f.name: _to_dict(getattr(value, f.name)) for f in fields(value)}
    return value


def entity_to_dict(entity: Any) -> Dict[str, Any]:
    return {f.name: _to_dict(getattr(entity, f.name)) for f in fields(entity)}


def to_canonical_json(entity: Any) -> str:
    """Compact, key-sorted JSON with the listed snake_case field names."""
    return json.dumps(entity_to_dict(entity), sort_keys=True, separators=(",", ":"))


def entity_from_dict(kind: str, data: Dict[str, Any]) -> Any:
    cls = _ENTITY_TYPES[kind]
    data = dict(data)
    if kind == "transcript":
        data["segments"] = tuple(Segment(**s) for s in data["segments"])
    if kind == "note":
        data["sections"] = tuple(NoteSection(**s) for s in data["sections"])
        data["transcript_ids"] = tuple(data["transcript_ids"])
        data["token_usage"] = tuple(data["token_usage"])
    if kind == "session":
        data["recording_ids"] = tuple(data["recording_ids"])
        data["note_ids"] = tuple(data["note_ids"])
    return cls(**data)


def entity_from_json(kind: str, raw: str) -> Any:
    return entity_from_dict(kind, json.loads(raw))


def validate_entity(entity: Any) -> List[str]:
    """Type-level invariant checks enforced by the store before save."""
    problems: List[str] = []
    if isinstance(entity, Session):
        if len(set(entity.recording_ids)) != len(entity.recording_ids):
            problems.append("duplicate recording_ids")
        if len(set(entity.note_ids)) != len(entity.note_ids):
            problems.append("duplicate note_ids")
    elif isinstance(entity, Recording):
        if entity.duration_s < 0:
            problems.append("negative duration_s")
        if entity.sample_rate_hz <= 0:
            problems.append("sample_rate_hz not positive")
        if entity.status not in RECORDING_STATUSES:
            problems.append(f"unknown recording status {entity.status!r}")
    elif isinstance(entity, Transcript):
        problems.extend(entity.check())
    elif isinstance(entity, Note):
        if entity.status not in NOTE_STATUSES:
            problems.append(f"unknown note status {entity.status!r}")
        if not entity.transcript_ids:
            problems.append("transcript_ids empty")
        if any(t < 0 for t in entity.token_usage):
            problems.append("negative token counts")
    elif isinstance(entity, Job):
        if entity.state not in ("queued", "running", "done", "failed"):
            problems.append(f"unknown job state {entity.state!r}")
        if (entity.finished_at is not None) != (entity.state in ("done", "failed")):
            problems.append("finished_at present iff job is done or failed")
        if entity.attempt < 0:
            problems.append("negative attempt")
    elif isinstance(entity, UserProfile):
        if entity.role not in ("clinician", "admin"):
            problems.append(f"unknown role {entity.role!r}")
    return problems


# convenience for builders that tweak one field on a frozen record
update = replace
