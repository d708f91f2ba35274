"""Exception types shared across the platform.

Every error that crosses a module boundary is one of these; the API layer
maps each class to exactly one HTTP status code.
"""


class BertaError(Exception):
    """Base class for all platform errors."""


class IllegalTransition(BertaError):
    """A lifecycle event was applied to a state that does not accept it."""

    def __init__(self, entity_kind: str, current: str, event: str):
        self.entity_kind = entity_kind
        self.current = current
        self.event = event
        super().__init__(f"{entity_kind}: no transition from {current!r} on {event!r}")


class DanglingReference(BertaError):
    """A referenced entity id could not be resolved in the store."""


class NotFound(BertaError):
    """Entity lookup failed."""

    def __init__(self, kind: str, entity_id: str):
        self.kind = kind
        self.entity_id = entity_id
        super().__init__(f"{kind} {entity_id} not found")


class InvariantViolation(BertaError):
    """An entity failed its type invariants on save."""


class UnknownUser(BertaError):
    """Referenced user id does not exist."""


class EmptyAudio(BertaError):
    """Zero-duration or zero-length audio was submitted."""


class UnsupportedMedia(BertaError):
    """Audio container/codec is not accepted by this deployment."""


class SessionArchived(BertaError):
    """Write attempted against an archived session."""


class BackendUnavailable(BertaError):
    """Remote backend unreachable after the retry policy was exhausted."""


class BackendRejected(BertaError):
    """Backend returned a non-retryable error; its message is preserved."""


class MalformedOutput(BertaError):
    """Model output violated the section contract even after one repair pass."""


class ContextOverflow(BertaError):
    """Prompt exceeds the backend's context limit."""


class EmptyTranscript(BertaError):
    """All source transcripts have empty text; nothing to generate from."""


class TranscriptNotReady(BertaError):
    """A note referenced a transcript outside its session or not yet complete."""


class SectionMismatch(BertaError):
    """Edited sections do not match the note's template section titles."""


class EmptyBlob(BertaError):
    """Attempt to store a zero-length blob."""


class StorageFull(BertaError):
    """The storage backend refused a write for capacity reasons."""


class ConfigInvalid(BertaError):
    """Service configuration failed validation."""


class AddressInUse(BertaError):
    """The configured listen address is already bound."""


class Unauthorized(BertaError):
    """Request credentials missing or invalid."""


class NoUsers(BertaError):
    """Cost breakdown requested over a period with zero unique users."""
