import pytest
from hypothesis import given, strategies as st

from berta import asr, model
from berta.errors import BackendRejected, BackendUnavailable, EmptyAudio
from conftest import write_sidecar
from stubserver import StubServer


def make_recording(duration_s=10.0):
    return model.Recording(
        id=model.new_id(),
        session_id="s",
        blob_ref="b",
        duration_s=duration_s,
        sample_rate_hz=16000,
        media_format="wav",
        status="uploaded",
        created_at=model.utc_now(),
    )


def make_transcript(texts):
    segments = tuple(
        model.Segment(float(i), float(i + 1), t) for i, t in enumerate(texts)
    )
    return model.Transcript(
        id=model.new_id(),
        recording_id="r",
        segments=segments,
        full_text=" ".join(texts),
        language_tag="en",
        asr_backend_id="mock",
        asr_model_id="m",
        created_at=model.utc_now(),
    )


class TestMockBackend:
    def test_sidecar_echo(self, mock_asr):
        audio = b"fixture-audio-bytes"
        write_sidecar(mock_asr, audio, "patient reports chest pain")
        rec = make_recording(duration_s=12.0)
        t = asr.transcribe(rec, audio, mock_asr)
        assert len(t.segments) == 1
        assert t.segments[0].start_s == 0.0
        assert t.segments[0].end_s == 12.0
        assert t.full_text == "patient reports chest pain"
        assert t.asr_backend_id == "mock-asr"
        assert t.asr_model_id == "mock-asr-1"

    def test_zero_duration_rejected(self, mock_asr):
        with pytest.raises(EmptyAudio):
            asr.transcribe(make_recording(duration_s=0.0), b"x", mock_asr)

    def test_zero_bytes_rejected(self, mock_asr):
        with pytest.raises(EmptyAudio):
            asr.transcribe(make_recording(), b"", mock_asr)

    def test_long_fixture_invariants(self, mock_asr):
        audio = b"a" * 1000
        write_sidecar(mock_asr, audio, "line one\nline two\nline three")
        rec = make_recording(duration_s=456.0)
        t = asr.transcribe(rec, audio, mock_asr)
        assert t.check(rec.duration_s) == []
        assert t.segments[-1].end_s <= 456.5
        starts = [s.start_s for s in t.segments]
        assert starts == sorted(starts)

    def test_deterministic(self, mock_asr):
        rec = make_recording()
        a = asr.transcribe(rec, b"same-bytes", mock_asr)
        b = asr.transcribe(rec, b"same-bytes", mock_asr)
        assert a.full_text == b.full_text


class TestApplyLexicon:
    def test_empty_lexicon_is_identity(self):
        t = make_transcript(["hello world"])
        assert asr.apply_lexicon(t, asr.VocabularyLexicon()) == t

    def test_direct_substitution(self):
        t = make_transcript(["seen at wabaska clinic"])
        lex = asr.VocabularyLexicon(entries=((("wabaska"), "Wabasca"),))
        out = asr.apply_lexicon(t, lex)
        assert out.full_text == "seen at Wabasca clinic"

    def test_whole_token_only(self):
        t = make_transcript(["wabaskan is not wabaska"])
        lex = asr.VocabularyLexicon(entries=(("wabaska", "Wabasca"),))
        assert asr.apply_lexicon(t, lex).full_text == "wabaskan is not Wabasca"

    def test_case_insensitive(self):
        t = make_transcript(["WABASKA then Wabaska"])
        lex = asr.VocabularyLexicon(entries=(("wabaska", "Wabasca"),))
        assert asr.apply_lexicon(t, lex).full_text == "Wabasca then Wabasca"

    def test_multiword_longest_first(self):
        t = make_transcript(["transfer to grand prairie hospital"])
        lex = asr.VocabularyLexicon(
            entries=(("grand prairie hospital", "Grande Prairie Regional Hospital"),
                     ("grand prairie", "Grande Prairie"))
        )
        out = asr.apply_lexicon(t, lex)
        assert out.full_text == "transfer to Grande Prairie Regional Hospital"

    def test_other_fields_unchanged(self):
        t = make_transcript(["wabaska", "ok"])
        lex = asr.VocabularyLexicon(entries=(("wabaska", "Wabasca"),))
        out = asr.apply_lexicon(t, lex)
        assert out.id == t.id
        assert out.created_at == t.created_at
        assert [(s.start_s, s.end_s) for s in out.segments] == [
            (s.start_s, s.end_s) for s in t.segments
        ]

    def test_idempotent_when_canonicals_are_not_surfaces(self):
        t = make_transcript(["wabaska clinic wabaska"])
        lex = asr.VocabularyLexicon(entries=(("wabaska", "Wabasca"),))
        once = asr.apply_lexicon(t, lex)
        assert asr.apply_lexicon(once, lex) == once

    @given(
        words=st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta", "x1"]), min_size=0, max_size=12),
        mapping=st.dictionaries(
            st.sampled_from(["alpha", "beta", "gamma"]),
            st.sampled_from(["ALPHA", "Bravo", "G"]),
            max_size=3,
        ),
    )
    def test_matches_token_oracle(self, words, mapping):
        text = " ".join(words)
        t = make_transcript([text]) if text else make_transcript([""])
        lex = asr.VocabularyLexicon(entries=tuple(mapping.items()))
        out = asr.apply_lexicon(t, lex)
        # naive independent oracle: one pass over whitespace tokens
        expected = " ".join(mapping.get(w.lower(), w) for w in words)
        assert out.full_text == expected

    def test_lexicon_validation(self):
        assert asr.VocabularyLexicon(entries=(("a", "b"), ("A", "c"))).check()
        assert asr.VocabularyLexicon(entries=(("", "b"),)).check()
        assert asr.VocabularyLexicon(entries=(("a", "b"), ("c", "d"))).check() == []


class TestHttpBackend:
    def test_segments_parsed_from_stub(self):
        payload = {
            "text": "hello there general",
            "language": "en",
            "segments": [
                {"start": 0.0, "end": 1.5, "text": "hello there"},
                {"start": 1.5, "end": 3.0, "text": "general"},
            ],
        }
        stub = StubServer(lambda m, p, b: (200, payload))
        try:
            backend = asr.AsrBackendDescriptor(
                backend_id="http-asr", kind="http_transcription",
                model_id="whisper-1", endpoint=stub.url + "/transcribe", timeout_s=5,
            )
            t = asr.transcribe(make_recording(duration_s=3.0), b"wavbytes", backend)
            assert t.full_text == "hello there general"
            assert t.check(3.0) == []
            method, path, body, headers = stub.requests[0]
            assert method == "POST"
            assert b"whisper-1" in body  # model field in the multipart form
            assert b"wavbytes" in body
        finally:
            stub.close()

    def test_unreachable_endpoint_after_retries(self):
        backend = asr.AsrBackendDescriptor(
            backend_id="http-asr", kind="http_transcription", model_id="m",
            endpoint="http://127.0.0.1:9/transcribe", timeout_s=0.2,
            max_retries=2, backoff_base_s=0.0,
        )
        attempts = []
        with pytest.raises(BackendUnavailable):
            asr.transcribe(make_recording(), b"x", backend, attempt_log=attempts)
        assert attempts == [1, 2, 3]  # at most 1 + max_retries attempts

    def test_non_retryable_rejection(self):
        stub = StubServer(lambda m, p, b: (400, {"error": "bad model"}))
        try:
            backend = asr.AsrBackendDescriptor(
                backend_id="http-asr", kind="http_transcription", model_id="m",
                endpoint=stub.url, timeout_s=5, backoff_base_s=0.0,
            )
            with pytest.raises(BackendRejected) as err:
                asr.transcribe(make_recording(), b"x", backend)
            assert "bad model" in str(err.value)
            assert len(stub.requests) == 1  # 4xx is not retried
        finally:
            stub.close()


class TestHealthCheck:
    def test_mock_healthy(self, mock_asr):
        assert asr.health_check(mock_asr).healthy

    def test_unreachable_unhealthy(self):
        backend = asr.AsrBackendDescriptor(
            backend_id="b", kind="http_transcription", model_id="m",
            endpoint="http://127.0.0.1:9/", timeout_s=0.2,
        )
        health = asr.health_check(backend)
        assert not health.healthy
        assert "connection" in health.reason

    def test_stub_probe_healthy(self):
        stub = StubServer(lambda m, p, b: (200, {"ok": True}))
        try:
            backend = asr.AsrBackendDescriptor(
                backend_id="b", kind="http_transcription", model_id="m",
                endpoint=stub.url, timeout_s=5,
            )
            assert asr.health_check(backend).healthy
        finally:
            stub.close()

    def test_descriptor_validation(self):
        bad = asr.AsrBackendDescriptor(backend_id="b", kind="http_transcription", model_id="m")
        assert bad.check()
        good = asr.AsrBackendDescriptor(backend_id="b", kind="mock", model_id="m")
        assert good.check() == []
