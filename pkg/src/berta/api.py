"""RESTful surface binding the orchestrator, store, templates, and metrics.

Error mapping (total; unknown errors become 500 without leaking internals):

    NotFound / UnknownUser                    -> 404
    IllegalTransition / SessionArchived /
    TranscriptNotReady                        -> 409
    UnsupportedMedia                          -> 415
    upload body over the configured limit     -> 413
    InvariantViolation / SectionMismatch /
    EmptyAudio / EmptyBlob / EmptyTranscript /
    NoUsers / validation failures             -> 422
    Unauthorized                              -> 401
    BackendUnavailable / BackendRejected /
    MalformedOutput / ContextOverflow         -> 502
"""

from __future__ import annotations

import threading
from typing import Any, Dict, List, Optional

from fastapi import Depends, FastAPI, Header, Request, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import auth, metrics as metrics_mod, model, templates as tmpl
from .asr import health_check as asr_health
from .config import ApiConfig
from .errors import (
    BackendRejected,
    BackendUnavailable,
    BertaError,
    ContextOverflow,
    EmptyAudio,
    EmptyBlob,
    EmptyTranscript,
    IllegalTransition,
    InvariantViolation,
    MalformedOutput,
    NotFound,
    NoUsers,
    SectionMismatch,
    SessionArchived,
    TranscriptNotReady,
    Unauthorized,
    UnknownUser,
    UnsupportedMedia,
)
from .llm import health_check as llm_health
from .orchestrator import Orchestrator
from .store import Store

ERROR_STATUS = {
    NotFound: 404,
    UnknownUser: 404,
    IllegalTransition: 409,
    SessionArchived: 409,
    TranscriptNotReady: 409,
    UnsupportedMedia: 415,
    InvariantViolation: 422,
    SectionMismatch: 422,
    EmptyAudio: 422,
    EmptyBlob: 422,
    EmptyTranscript: 422,
    NoUsers: 422,
    Unauthorized: 401,
    BackendUnavailable: 502,
    BackendRejected: 502,
    MalformedOutput: 502,
    ContextOverflow: 502,
}


class CreateSessionBody(BaseModel):
    facility_id: Optional[str] = None


class CreateNoteBody(BaseModel):
    template_id: str
    transcript_ids: List[str]
    encounter_context: Optional[str] = None


class SectionBody(BaseModel):
    title: str
    body: str


class EditNoteBody(BaseModel):
    sections: List[SectionBody]


class CreateTemplateBody(BaseModel):
    name: str
    sections: List[Dict[str, str]]
    preamble: str = ""


def _session_view(store: Store, session: model.Session) -> Dict[str, Any]:
    view = model.entity_to_dict(session)
    view["status"] = model.derive_session_status(session, store)
    return view


def create_app(config: ApiConfig, store: Store, orch: Orchestrator) -> FastAPI:
    app = FastAPI(title="berta", version="0.1.0", openapi_url="/openapi")

    def actor(authorization: Optional[str] = Header(default=None)) -> str:
        return auth.authenticate(authorization, config)

    @app.exception_handler(BertaError)
    async def berta_error_handler(_request: Request, exc: BertaError):
        status = ERROR_STATUS.get(type(exc), 500)
        body = {"error": type(exc).__name__, "detail": str(exc)} if status != 500 else {
            "error": "InternalError"
        }
        return JSONResponse(status_code=status, content=body)

    @app.get("/healthz")
    def healthz():
        asr_backend = orch.asr_backend
        llm_backend = orch.llm_backend
        a = asr_health(asr_backend)
        l = llm_health(llm_backend)
        return {
            "status": "ok" if a.healthy and l.healthy else "degraded",
            "backends": {
                asr_backend.backend_id: {"healthy": a.healthy, "reason": a.reason},
                llm_backend.backend_id: {"healthy": l.healthy, "reason": l.reason},
            },
        }

    # -- sessions -----------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody, actor_id: str = Depends(actor)):
        session = orch.create_session(actor_id, body.facility_id)
        return _session_view(store, session)

    @app.get("/sessions")
    def list_sessions(actor_id: str = Depends(actor)):
        return [_session_view(store, s) for s in store.list_sessions(actor_id)]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str, actor_id: str = Depends(actor)):
        session = store.load_entity("session", session_id)
        _require_owner(store, session, actor_id)
        return _session_view(store, session)

    # -- recordings ---------------------------------------------------------

    @app.post("/sessions/{session_id}/recordings", status_code=202)
    async def upload_recording(
        session_id: str,
        file: UploadFile,
        request: Request,
        actor_id: str = Depends(actor),
    ):
        session = store.load_entity("session", session_id)
        _require_owner(store, session, actor_id)
        declared = request.headers.get("content-length")
        if declared is not None and int(declared) > config.max_upload_bytes:
            return JSONResponse(
                status_code=413,
                content={"error": "UploadTooLarge", "detail": "body exceeds limit"},
            )
        # stream with a hard cap so an unbounded body is never fully buffered
        chunks = []
        received = 0
        while True:
            chunk = await file.read(1024 * 1024)
            if not chunk:
                break
            received += len(chunk)
            if received > config.max_upload_bytes:
                return JSONResponse(
                    status_code=413,
                    content={"error": "UploadTooLarge", "detail": "body exceeds limit"},
                )
            chunks.append(chunk)
        data = b"".join(chunks)
        media_format = "wav"
        if file.filename and "." in file.filename:
            media_format = file.filename.rsplit(".", 1)[1].lower()
        recording, job = orch.attach_recording(
            session_id, data, media_format, actor_id
        )
        return {"recording": model.entity_to_dict(recording), "job_id": job.id}

    @app.get("/recordings/{recording_id}")
    def get_recording(recording_id: str, actor_id: str = Depends(actor)):
        recording = store.load_entity("recording", recording_id)
        session = store.load_entity("session", recording.session_id)
        _require_owner(store, session, actor_id)
        return model.entity_to_dict(recording)

    @app.get("/recordings/{recording_id}/transcript")
    def get_transcript(recording_id: str, actor_id: str = Depends(actor)):
        recording = store.load_entity("recording", recording_id)
        session = store.load_entity("session", recording.session_id)
        _require_owner(store, session, actor_id)
        transcript = orch.transcript_for_recording(recording_id)
        return model.entity_to_dict(transcript)

    # -- notes --------------------------------------------------------------

    @app.post("/sessions/{session_id}/notes", status_code=202)
    def create_note(
        session_id: str, body: CreateNoteBody, actor_id: str = Depends(actor)
    ):
        session = store.load_entity("session", session_id)
        _require_owner(store, session, actor_id)
        note, job = orch.enqueue_generation(
            session_id, body.template_id, body.transcript_ids, actor_id,
            body.encounter_context,
        )
        return {"note": model.entity_to_dict(note), "job_id": job.id}

    @app.get("/notes/{note_id}")
    def get_note(note_id: str, actor_id: str = Depends(actor)):
        note = store.load_entity("note", note_id)
        session = store.load_entity("session", note.session_id)
        _require_owner(store, session, actor_id)
        return model.entity_to_dict(note)

    @app.patch("/notes/{note_id}")
    def edit_note(note_id: str, body: EditNoteBody, actor_id: str = Depends(actor)):
        note = store.load_entity("note", note_id)
        session = store.load_entity("session", note.session_id)
        _require_owner(store, session, actor_id)
        sections = [model.NoteSection(s.title, s.body) for s in body.sections]
        return model.entity_to_dict(orch.edit_note(note_id, sections, actor_id))

    @app.post("/notes/{note_id}/finalize")
    def finalize_note(note_id: str, actor_id: str = Depends(actor)):
        note = store.load_entity("note", note_id)
        session = store.load_entity("session", note.session_id)
        _require_owner(store, session, actor_id)
        return model.entity_to_dict(orch.finalize_note(note_id, actor_id))

    # -- templates ----------------------------------------------------------

    @app.get("/templates")
    def list_templates(actor_id: str = Depends(actor)):
        return [tmpl.template_to_dict(t) for t in store.list_templates(actor_id)]

    @app.get("/templates/{template_id}")
    def get_template(template_id: str, actor_id: str = Depends(actor)):
        return tmpl.template_to_dict(store.load_template(template_id))

    @app.post("/templates", status_code=201)
    def create_template(body: CreateTemplateBody, actor_id: str = Depends(actor)):
        template = tmpl.NoteTemplate(
            id=model.new_id(),
            name=body.name,
            kind="custom",
            owner_id=actor_id,
            sections=tuple(
                tmpl.TemplateSection(s["title"], s.get("instruction_text", ""))
                for s in body.sections
            ),
            preamble=body.preamble,
            created_at=model.utc_now(),
        )
        violations = tmpl.validate_template(template)
        if violations:
            return JSONResponse(
                status_code=422,
                content={"error": "InvalidTemplate", "violations": violations},
            )
        store.save_template(template)
        store.append_audit(actor_id, "template_created", "template", template.id, {})
        return tmpl.template_to_dict(template)

    # -- metrics ------------------------------------------------------------

    @app.get("/metrics")
    def get_metrics(period: str = "all", actor_id: str = Depends(actor)):
        _require_admin(store, actor_id)
        result = metrics_mod.aggregate(period, store)
        return result.__dict__

    return app


def _require_owner(store: Store, session: model.Session, actor_id: str) -> None:
    if session.owner_id == actor_id:
        return
    try:
        user = store.load_entity("user", actor_id)
        if user.role == "admin":
            return
    except NotFound:
        pass
    raise NotFound("session", session.id)  # do not reveal other users' sessions


def _require_admin(store: Store, actor_id: str) -> None:
    try:
        user = store.load_entity("user", actor_id)
    except NotFound:
        raise Unauthorized("unknown user")
    if user.role != "admin":
        raise Unauthorized("admin role required")


def ensure_users(config: ApiConfig, store: Store) -> None:
    """Seed configured users plus the fixed dev user in dev mode."""
    for u in config.users:
        store.save_entity(
            model.UserProfile(
                id=u["id"],
                display_name=u.get("display_name", u["id"]),
                role=u.get("role", "clinician"),
                created_at=model.utc_now(),
            )
        )
    if config.auth_mode == "none_dev" and not store.has_entity("user", auth.DEV_USER_ID):
        store.save_entity(
            model.UserProfile(
                id=auth.DEV_USER_ID,
                display_name="Dev User",
                role="admin",
                created_at=model.utc_now(),
            )
        )


class ServiceHandle:
    """A running HTTP service; stop() drains jobs and shuts the server down."""

    def __init__(self, config: ApiConfig, server, thread: threading.Thread, orch: Orchestrator, store: Store):
        self.config = config
        self._server = server
        self._thread = thread
        self.orchestrator = orch
        self.store = store

    @property
    def base_url(self) -> str:
        return f"http://{self.config.listen_host}:{self.config.listen_port}"

    def stop(self) -> None:
        self.orchestrator.shutdown()
        self._server.should_exit = True
        self._thread.join(timeout=10)


def serve(config: ApiConfig, wait: bool = True) -> ServiceHandle:
    """Validate config, build the stack, and run uvicorn.

    With wait=False the server runs on a daemon thread and the handle is
    returned once the socket is accepting connections.
    """
    import socket
    import time

    import uvicorn

    from .errors import AddressInUse

    config.validate()
    probe = socket.socket()
    try:
        probe.bind((config.listen_host, config.listen_port))
    except OSError as exc:
        raise AddressInUse(f"{config.listen_host}:{config.listen_port}: {exc}") from exc
    finally:
        probe.close()
    store = Store(config.storage_root)
    ensure_users(config, store)
    orch = Orchestrator(
        store,
        config.active_asr(),
        config.active_llm(),
        config.lexicon,
        transcription_workers=config.transcription_workers,
        generation_workers=config.generation_workers,
    )
    app = create_app(config, store, orch)
    uv_config = uvicorn.Config(
        app, host=config.listen_host, port=config.listen_port, log_level="warning"
    )
    server = uvicorn.Server(uv_config)
    if wait:
        thread = threading.current_thread()
        handle = ServiceHandle(config, server, thread, orch, store)
        server.run()
        return handle
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server failed to start")
        time.sleep(0.02)
    return ServiceHandle(config, server, thread, orch, store)
