"""Session lifecycle driver: ingest audio, run transcription and generation
jobs on worker pools, and record every step in the audit chain.

Per-entity writes are serialized by the store; session list mutations take an
orchestrator-level lock so concurrent uploads never lose an id. Jobs for
distinct recordings run in parallel; a generation job observes the completed
transcripts it references through the store (happens-before via job ordering).
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from . import asr, audio, llm, model, templates
from .errors import (
    BertaError,
    EmptyAudio,
    IllegalTransition,
    NotFound,
    SectionMismatch,
    SessionArchived,
    TranscriptNotReady,
    UnknownUser,
)
from .store import Store


def _sections_digest(sections: Sequence[model.NoteSection]) -> str:
    canonical = json.dumps(
        [[s.title, s.body] for s in sections], separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Orchestrator:
    def __init__(
        self,
        store: Store,
        asr_backend: asr.AsrBackendDescriptor,
        llm_backend: llm.LlmBackendDescriptor,
        lexicon: Optional[asr.VocabularyLexicon] = None,
        transcription_workers: int = 4,
        generation_workers: int = 4,
    ):
        self.store = store
        self.asr_backend = asr_backend
        self.llm_backend = llm_backend
        self.lexicon = lexicon or asr.VocabularyLexicon()
        self._session_lock = threading.Lock()
        self._transcription_pool = ThreadPoolExecutor(
            max_workers=transcription_workers, thread_name_prefix="transcribe"
        )
        self._generation_pool = ThreadPoolExecutor(
            max_workers=generation_workers, thread_name_prefix="generate"
        )
        self._pending: List[Future] = []
        self._pending_lock = threading.Lock()

    # -- lifecycle ----------------------------------------------------------

    def shutdown(self) -> None:
        """Drain running jobs, then stop the pools."""
        self.drain()
        self._transcription_pool.shutdown(wait=True)
        self._generation_pool.shutdown(wait=True)

    def drain(self) -> None:
        """Block until every submitted job has finished."""
        while True:
            with self._pending_lock:
                pending = [f for f in self._pending if not f.done()]
                self._pending = pending
                if not pending:
                    return
                waiting_on = pending[0]
            try:
                waiting_on.result()
            except Exception:
                pass  # job failures are recorded on the job record

    def _submit(self, pool: ThreadPoolExecutor, fn, *args) -> None:
        future = pool.submit(fn, *args)
        with self._pending_lock:
            self._pending.append(future)

    # -- sessions -----------------------------------------------------------

    def create_session(
        self, owner_id: str, facility_id: Optional[str] = None
    ) -> model.Session:
        if not self.store.has_entity("user", owner_id):
            raise UnknownUser(owner_id)
        session = model.Session(
            id=model.new_id(),
            owner_id=owner_id,
            facility_id=facility_id,
            created_at=model.utc_now(),
        )
        self.store.save_entity(session)
        self.store.append_audit(
            owner_id, "session_created", "session", session.id,
            {"facility_id": facility_id},
        )
        return session

    def archive_session(self, session_id: str, actor_id: str) -> model.Session:
        with self._session_lock:
            session = self.store.load_entity("session", session_id)
            session = model.update(session, archived=True)
            self.store.save_entity(session)
        self.store.append_audit(actor_id, "session_archived", "session", session_id, {})
        return session

    # -- recordings / transcription -----------------------------------------

    def attach_recording(
        self,
        session_id: str,
        audio_bytes: bytes,
        media_format: str = "wav",
        actor_id: Optional[str] = None,
    ) -> Tuple[model.Recording, model.Job]:
        session = self.store.load_entity("session", session_id)
        if session.archived:
            raise SessionArchived(session_id)
        info = audio.probe(audio_bytes, media_format)
        blob = self.store.put_blob(audio_bytes, info.media_format)
        actor = actor_id or session.owner_id
        recording = model.Recording(
            id=model.new_id(),
            session_id=session_id,
            blob_ref=blob.address,
            duration_s=info.duration_s,
            sample_rate_hz=info.sample_rate_hz,
            media_format=info.media_format,
            status="uploaded",
            created_at=model.utc_now(),
        )
        self.store.save_entity(recording)
        with self._session_lock:
            session = self.store.load_entity("session", session_id)
            session = model.update(
                session, recording_ids=session.recording_ids + (recording.id,)
            )
            self.store.save_entity(session)
        self.store.append_audit(
            actor, "recording_uploaded", "recording", recording.id,
            {"session_id": session_id, "blob_ref": blob.address,
             "duration_s": info.duration_s},
        )
        job = model.Job(
            id=model.new_id(),
            kind="transcription",
            subject_id=recording.id,
            attempt=1,
            state="queued",
            enqueued_at=model.utc_now(),
        )
        self.store.save_entity(job)
        self.store.append_audit(
            actor, "job_enqueued", "job", job.id,
            {"kind": "transcription", "subject_id": recording.id},
        )
        self._submit(self._transcription_pool, self.run_transcription, job.id, actor)
        return recording, job

    def run_transcription(self, job_id: str, actor_id: str = "system") -> Optional[model.Transcript]:
        job = self.store.load_entity("job", job_id)
        recording = self.store.load_entity("recording", job.subject_id)
        recording = model.update(
            recording,
            status=model.next_state("recording", recording.status, "transcription_started"),
        )
        self.store.save_entity(recording)
        self.store.save_entity(model.update(job, state="running"))
        audio_bytes = self.store.get_blob(recording.blob_ref)
        attempts: List[int] = []
        try:
            transcript = asr.transcribe(
                recording, audio_bytes, self.asr_backend, self.lexicon, attempt_log=attempts
            )
        except BertaError as exc:
            self.store.save_entity(
                model.update(
                    recording,
                    status=model.next_state("recording", "transcribing", "transcription_failed"),
                )
            )
            self.store.save_entity(
                model.update(
                    job,
                    state="failed",
                    attempt=max(attempts, default=1),
                    finished_at=model.utc_now(),
                    error=str(exc),
                )
            )
            self.store.append_audit(
                actor_id, "transcription_failed", "recording", recording.id,
                {"job_id": job.id, "attempts": max(attempts, default=1),
                 "backend_id": self.asr_backend.backend_id, "error": str(exc)},
            )
            return None
        self.store.save_entity(transcript)
        self.store.save_entity(
            model.update(
                recording,
                status=model.next_state("recording", "transcribing", "transcription_succeeded"),
            )
        )
        self.store.save_entity(
            model.update(
                job,
                state="done",
                attempt=max(attempts, default=1),
                finished_at=model.utc_now(),
            )
        )
        self.store.append_audit(
            actor_id, "transcription_completed", "transcript", transcript.id,
            {"job_id": job.id, "recording_id": recording.id,
             "attempts": max(attempts, default=1),
             "backend_id": self.asr_backend.backend_id},
        )
        return transcript

    def transcript_for_recording(self, recording_id: str) -> model.Transcript:
        for transcript in self.store.iter_entities("transcript"):
            if transcript.recording_id == recording_id:
                return transcript
        raise NotFound("transcript", f"for recording {recording_id}")

    # -- notes / generation --------------------------------------------------

    def _check_note_inputs(
        self, session: model.Session, transcript_ids: Sequence[str]
    ) -> List[model.Transcript]:
        if session.archived:
            raise SessionArchived(session.id)
        transcripts = []
        for tid in transcript_ids:
            try:
                transcript = self.store.load_entity("transcript", tid)
            except NotFound:
                raise TranscriptNotReady(f"transcript {tid} does not exist")
            if transcript.recording_id not in session.recording_ids:
                raise TranscriptNotReady(
                    f"transcript {tid} does not belong to session {session.id}"
                )
            recording = self.store.load_entity("recording", transcript.recording_id)
            if recording.status != "transcribed":
                raise TranscriptNotReady(
                    f"recording {recording.id} is {recording.status}, not transcribed"
                )
            transcripts.append(transcript)
        if not transcripts:
            raise TranscriptNotReady("no transcripts supplied")
        return transcripts

    def enqueue_generation(
        self,
        session_id: str,
        template_id: str,
        transcript_ids: Sequence[str],
        actor_id: Optional[str] = None,
        encounter_context: Optional[str] = None,
    ) -> Tuple[model.Note, model.Job]:
        """Asynchronous variant backing the API's 202 path."""
        session = self.store.load_entity("session", session_id)
        self._check_note_inputs(session, transcript_ids)
        template = self.store.load_template(template_id)
        actor = actor_id or session.owner_id
        note = model.Note(
            id=model.new_id(),
            session_id=session_id,
            template_id=template.id,
            transcript_ids=tuple(transcript_ids),
            sections=(),
            llm_backend_id=self.llm_backend.backend_id,
            llm_model_id=self.llm_backend.model_id,
            token_usage=(0, 0),
            status="generating",
            created_at=model.utc_now(),
        )
        self.store.save_entity(note)
        with self._session_lock:
            session = self.store.load_entity("session", session_id)
            session = model.update(session, note_ids=session.note_ids + (note.id,))
            self.store.save_entity(session)
        job = model.Job(
            id=model.new_id(),
            kind="generation",
            subject_id=note.id,
            attempt=1,
            state="queued",
            enqueued_at=model.utc_now(),
        )
        self.store.save_entity(job)
        self.store.append_audit(
            actor, "job_enqueued", "job", job.id,
            {"kind": "generation", "subject_id": note.id},
        )
        self._submit(
            self._generation_pool, self.run_generation, job.id, actor, encounter_context
        )
        return note, job

    def run_generation(
        self, job_id: str, actor_id: str = "system", encounter_context: Optional[str] = None
    ) -> Optional[model.Note]:
        job = self.store.load_entity("job", job_id)
        note = self.store.load_entity("note", job.subject_id)
        template = self.store.load_template(note.template_id)
        transcripts = [
            self.store.load_entity("transcript", tid) for tid in note.transcript_ids
        ]
        self.store.save_entity(model.update(job, state="running"))
        attempts: List[int] = []
        try:
            bundle = templates.render_prompt(template, transcripts, encounter_context)
            result = llm.generate(
                bundle,
                self.llm_backend,
                parse=lambda raw: templates.parse_sections(raw, template),
                attempt_log=attempts,
            )
        except BertaError as exc:
            failed = model.update(
                note,
                status=model.next_state("note", "generating", "generation_failed"),
            )
            self.store.save_entity(failed)
            self.store.save_entity(
                model.update(
                    job, state="failed", attempt=max(attempts, default=1),
                    finished_at=model.utc_now(), error=str(exc),
                )
            )
            self.store.append_audit(
                actor_id, "generation_failed", "note", note.id,
                {"job_id": job.id, "attempts": max(attempts, default=1),
                 "backend_id": self.llm_backend.backend_id, "error": str(exc)},
            )
            return None
        sections = tuple(model.NoteSection(t, b) for t, b in result.parsed_sections)
        note = model.update(
            note,
            sections=sections,
            token_usage=result.token_usage,
            status=model.next_state("note", "generating", "generation_succeeded"),
        )
        self.store.save_entity(note)
        self.store.save_entity(
            model.update(
                job, state="done", attempt=max(attempts, default=1),
                finished_at=model.utc_now(),
            )
        )
        self.store.append_audit(
            actor_id, "note_generated", "note", note.id,
            {"job_id": job.id, "template_id": template.id,
             "backend_id": self.llm_backend.backend_id,
             "prompt_tokens": result.token_usage[0],
             "completion_tokens": result.token_usage[1],
             "content_digest": _sections_digest(sections)},
        )
        return note

    def generate_note(
        self,
        session_id: str,
        template_id: str,
        transcript_ids: Sequence[str],
        actor_id: Optional[str] = None,
        encounter_context: Optional[str] = None,
    ) -> model.Note:
        """Synchronous generation: the note is draft (or failed) on return."""
        note, job = self.enqueue_generation(
            session_id, template_id, transcript_ids, actor_id, encounter_context
        )
        self.drain()
        return self.store.load_entity("note", note.id)

    def edit_note(
        self, note_id: str, new_sections: Sequence[model.NoteSection], actor_id: str
    ) -> model.Note:
        note = self.store.load_entity("note", note_id)
        if note.status not in ("draft", "edited"):
            raise IllegalTransition("note", note.status, "edit")
        template = self.store.load_template(note.template_id)
        new_sections = tuple(new_sections)
        if tuple(s.title for s in new_sections) != template.section_titles():
            raise SectionMismatch(
                f"sections must match template titles {template.section_titles()}"
            )
        old_digest = _sections_digest(note.sections)
        status = (
            model.next_state("note", "draft", "edit")
            if note.status == "draft"
            else "edited"  # repeat edits keep the edited status
        )
        note = model.update(
            note, sections=new_sections, status=status, edited_at=model.utc_now()
        )
        self.store.save_entity(note)
        self.store.append_audit(
            actor_id, "note_edited", "note", note.id,
            {"previous_digest": old_digest, "new_digest": _sections_digest(new_sections)},
        )
        return note

    def finalize_note(self, note_id: str, actor_id: str) -> model.Note:
        note = self.store.load_entity("note", note_id)
        status = model.next_state("note", note.status, "finalize")
        note = model.update(note, status=status)
        self.store.save_entity(note)
        self.store.append_audit(
            actor_id, "note_finalized", "note", note.id,
            {"content_digest": _sections_digest(note.sections)},
        )
        return note
