"""Berta: a self-hostable ambient-scribe platform with pluggable speech-to-text
and language-model backends, institution-local storage, and tamper-evident
audit logging."""

__version__ = "0.1.0"
