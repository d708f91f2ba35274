#!/usr/bin/env python3
"""Scripted pipeline run that can hard-kill itself between steps.

Used by the durability suite: run with --crash-after N to execute the first N
steps and then die with os._exit (no cleanup, no flushing beyond what the
store already did). Run with --verify afterwards to check that the audit
chain is intact and every committed entity is loadable.
"""

import argparse
import os
import sys

from berta import asr, llm, model
from berta.audio import make_wav
from berta.orchestrator import Orchestrator
from berta.store import Store

STEPS = [
    "create_session",
    "attach_recording",
    "drain_transcription",
    "generate_note",
    "edit_note",
    "finalize_note",
    "archive_session",
]


def build_orchestrator(root):
    store = Store(root)
    if not store.has_entity("user", "crash-user"):
        store.save_entity(
            model.UserProfile(
                id="crash-user", display_name="Crash Test",
                role="clinician", created_at=model.utc_now(),
            )
        )
    orch = Orchestrator(
        store,
        asr.AsrBackendDescriptor(backend_id="mock-asr", kind="mock", model_id="m"),
        llm.LlmBackendDescriptor(backend_id="mock-llm", kind="mock", model_id="m"),
        transcription_workers=1,
        generation_workers=1,
    )
    return store, orch


def run(root, crash_after):
    store, orch = build_orchestrator(root)
    state = {}

    def step_done(n):
        if crash_after == n:
            orch.drain()  # "between steps" means no write is in flight
            os._exit(137)  # hard kill: no cleanup, no interpreter shutdown

    session = orch.create_session("crash-user")
    state["session"] = session
    step_done(1)

    recording, _job = orch.attach_recording(session.id, make_wav(3.0))
    state["recording"] = recording
    step_done(2)

    orch.drain()
    transcript = orch.transcript_for_recording(recording.id)
    step_done(3)

    note = orch.generate_note(session.id, "builtin-narrative", [transcript.id])
    step_done(4)

    orch.edit_note(note.id, [model.NoteSection("Narrative", "edited body")], "crash-user")
    step_done(5)

    orch.finalize_note(note.id, "crash-user")
    step_done(6)

    orch.archive_session(session.id, "crash-user")
    step_done(7)

    orch.shutdown()
    store.close()
    return 0


def verify(root):
    store = Store(root)
    broken = store.verify_audit_chain()
    if broken is not None:
        print(f"audit chain broken at seq {broken}")
        return 1
    # every committed entity must load, and references must resolve
    for kind in ("session", "recording", "transcript", "note", "user", "job"):
        for entity in store.iter_entities(kind):
            store.load_entity(kind, entity.id)
    for session in store.iter_entities("session"):
        for rid in session.recording_ids:
            store.load_entity("recording", rid)
        for nid in session.note_ids:
            store.load_entity("note", nid)
    print("ok")
    return 0


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--root", required=True)
    parser.add_argument("--crash-after", type=int, default=0,
                        help="1-based step to die after; 0 runs to completion")
    parser.add_argument("--verify", action="store_true")
    args = parser.parse_args()
    if args.verify:
        return verify(args.root)
    return run(args.root, args.crash_after)


if __name__ == "__main__":
    sys.exit(main())
