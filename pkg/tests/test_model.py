import itertools

import pytest
from hypothesis import given, strategies as st

from berta import model
from berta.errors import DanglingReference, IllegalTransition

EVENTS = {
    "recording": ["transcription_started", "transcription_succeeded", "transcription_failed"],
    "note": ["generation_succeeded", "generation_failed", "edit", "finalize"],
}
STATUSES = {
    "recording": list(model.RECORDING_STATUSES),
    "note": list(model.NOTE_STATUSES),
}


class DictStore:
    """Minimal store view over in-memory entities."""

    def __init__(self, entities=()):
        self.entities = {(e.store_kind, e.id): e for e in entities}

    def add(self, entity):
        self.entities[(entity.store_kind, entity.id)] = entity

    def load_entity(self, kind, entity_id):
        return self.entities[(kind, entity_id)]


def make_session(recordings=(), notes=(), owner="u1"):
    return model.Session(
        id=model.new_id(),
        owner_id=owner,
        facility_id=None,
        created_at=model.utc_now(),
        recording_ids=tuple(r.id for r in recordings),
        note_ids=tuple(n.id for n in notes),
    )


def make_recording(status="uploaded", duration_s=10.0, created_at=None):
    return model.Recording(
        id=model.new_id(),
        session_id="s",
        blob_ref="b",
        duration_s=duration_s,
        sample_rate_hz=16000,
        media_format="wav",
        status=status,
        created_at=created_at or model.utc_now(),
    )


def make_note(status="draft", created_at=None):
    return model.Note(
        id=model.new_id(),
        session_id="s",
        template_id="builtin-narrative",
        transcript_ids=("t",),
        sections=(model.NoteSection("Narrative", "body"),),
        llm_backend_id="mock",
        llm_model_id="m",
        token_usage=(1, 1),
        status=status,
        created_at=created_at or model.utc_now(),
    )


class TestNextState:
    def test_recording_start(self):
        assert model.next_state("recording", "uploaded", "transcription_started") == "transcribing"

    def test_finalized_note_is_immutable(self):
        with pytest.raises(IllegalTransition):
            model.next_state("note", "finalized", "edit")

    def test_exhaustive_enumeration_matches_tables(self):
        # brute force over every (status, event) pair for both entity kinds
        for kind in ("recording", "note"):
            legal = 0
            for status, event in itertools.product(STATUSES[kind], EVENTS[kind]):
                try:
                    result = model.next_state(kind, status, event)
                except IllegalTransition:
                    table = model.RECORDING_TRANSITIONS if kind == "recording" else model.NOTE_TRANSITIONS
                    assert (status, event) not in table
                else:
                    table = model.RECORDING_TRANSITIONS if kind == "recording" else model.NOTE_TRANSITIONS
                    assert table[(status, event)] == result
                    assert result in STATUSES[kind]  # table is closed
                    legal += 1
            assert legal == (3 if kind == "recording" else 5)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            model.next_state("session", "empty", "anything")

    def test_unknown_status_rejected(self):
        with pytest.raises(ValueError):
            model.next_state("recording", "finalized", "transcription_started")


def oracle_session_status(session, store):
    """Independent clause-by-clause evaluation of the definition."""
    recordings = [store.load_entity("recording", r) for r in session.recording_ids]
    notes = [store.load_entity("note", n) for n in session.note_ids]
    if not recordings:
        return "empty"

    def newest_failed(children, ok):
        failed = [c for c in children if c.status == "failed"]
        for f in failed:
            later_ok = [
                c for c in children
                if c.status in ok and (c.created_at, c.id) > (f.created_at, f.id)
            ]
            if not later_ok:
                return True
        return False

    if newest_failed(recordings, {"transcribed"}) or newest_failed(
        notes, {"draft", "edited", "finalized"}
    ):
        return "error"
    if any(n.status in ("draft", "edited", "finalized") for n in notes):
        return "note_ready"
    if any(r.status == "transcribed" for r in recordings):
        return "transcribed"
    return "has_audio"


class TestDeriveSessionStatus:
    def test_no_recordings_is_empty(self):
        store = DictStore()
        assert model.derive_session_status(make_session(), store) == "empty"

    def test_two_transcribed_recordings_and_draft_note(self):
        recs = [make_recording("transcribed"), make_recording("transcribed")]
        note = make_note("draft")
        store = DictStore(recs + [note])
        session = make_session(recs, [note])
        assert model.derive_session_status(session, store) == "note_ready"

    def test_dangling_reference(self):
        session = make_session([make_recording()])
        with pytest.raises(DanglingReference):
            model.derive_session_status(session, DictStore())

    def test_failed_recording_superseded_by_later_success(self):
        failed = make_recording("failed", created_at="2025-01-01T00:00:00.000Z")
        retry = make_recording("transcribed", created_at="2025-01-02T00:00:00.000Z")
        store = DictStore([failed, retry])
        session = make_session([failed, retry])
        assert model.derive_session_status(session, store) == "transcribed"

    def test_newest_failure_poisons(self):
        ok = make_recording("transcribed", created_at="2025-01-01T00:00:00.000Z")
        failed = make_recording("failed", created_at="2025-01-02T00:00:00.000Z")
        store = DictStore([ok, failed])
        session = make_session([ok, failed])
        assert model.derive_session_status(session, store) == "error"

    @given(
        rec_statuses=st.lists(st.sampled_from(model.RECORDING_STATUSES), max_size=6),
        note_statuses=st.lists(st.sampled_from(model.NOTE_STATUSES), max_size=6),
    )
    def test_matches_oracle(self, rec_statuses, note_statuses):
        recs = [make_recording(s) for s in rec_statuses]
        notes = [make_note(s) for s in note_statuses]
        store = DictStore(recs + notes)
        session = make_session(recs, notes)
        derived = model.derive_session_status(session, store)
        assert derived == oracle_session_status(session, store)
        # pure function of the store view
        assert derived == model.derive_session_status(session, store)


class TestSessionAudioSeconds:
    def test_no_recordings(self):
        assert model.session_audio_seconds(make_session(), DictStore()) == 0

    def test_sums_to_mean_session_length_fixture(self):
        recs = [make_recording(duration_s=200.0), make_recording(duration_s=256.0)]
        store = DictStore(recs)
        total = model.session_audio_seconds(make_session(recs), store)
        assert total == 456.0
        assert total / 60 == pytest.approx(7.6)

    def test_mean_over_many_sessions(self):
        import random

        rng = random.Random(7)
        store = DictStore()
        sessions = []
        total = 0.0
        for _ in range(1000):
            recs = [make_recording(duration_s=rng.uniform(1, 900)) for _ in range(rng.randint(0, 3))]
            for r in recs:
                store.add(r)
            total += sum(r.duration_s for r in recs)
            sessions.append(make_session(recs))
        mean = sum(model.session_audio_seconds(s, store) for s in sessions) / 1000
        assert mean == pytest.approx(total / 1000, rel=1e-9)


class TestIdsAndSerde:
    def test_id_shape(self):
        ident = model.new_id()
        assert len(ident) == 32
        assert ident == ident.lower()
        int(ident, 16)

    def test_no_collisions(self):
        n = 100_000
        assert len({model.new_id() for _ in range(n)}) == n

    def test_canonical_json_round_trip(self):
        rec = make_recording("transcribed")
        raw = model.to_canonical_json(rec)
        assert model.entity_from_json("recording", raw) == rec

        note = make_note("edited")
        assert model.entity_from_json("note", model.to_canonical_json(note)) == note

        transcript = model.Transcript(
            id=model.new_id(),
            recording_id="r",
            segments=(model.Segment(0.0, 2.0, "hello there"),),
            full_text="hello there",
            language_tag="en",
            asr_backend_id="mock",
            asr_model_id="m",
            created_at=model.utc_now(),
        )
        assert model.entity_from_json("transcript", model.to_canonical_json(transcript)) == transcript

    def test_timestamp_is_utc_millis(self):
        ts = model.utc_now()
        assert ts.endswith("Z")
        assert len(ts.rsplit(".", 1)[1]) == 4  # three digits + Z
