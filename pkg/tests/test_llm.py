import pytest
from hypothesis import given, strategies as st

from berta import llm, templates
from berta.errors import BackendUnavailable, ContextOverflow, MalformedOutput
from stubserver import StubServer


def bundle_for(template, transcript_text="patient reports chest pain since this morning with some shortness of breath"):
    from berta import model

    transcript = model.Transcript(
        id=model.new_id(),
        recording_id="r",
        segments=(model.Segment(0.0, 5.0, transcript_text),),
        full_text=transcript_text,
        language_tag="en",
        asr_backend_id="mock",
        asr_model_id="m",
        created_at=model.utc_now(),
    )
    return templates.render_prompt(template, [transcript])


class TestMockBackend:
    def test_emits_every_requested_section(self, mock_llm):
        template = templates.builtin_templates()[0]  # Full Visit, 4 sections
        bundle = bundle_for(template)
        result = llm.generate(
            bundle, mock_llm, parse=lambda raw: templates.parse_sections(raw, template)
        )
        assert [t for t, _ in result.parsed_sections] == list(template.section_titles())
        # body is the first ten transcript words
        first_body = result.parsed_sections[0][1]
        assert first_body == "patient reports chest pain since this morning with some shortness"

    def test_deterministic(self, mock_llm):
        template = templates.builtin_templates()[1]
        bundle = bundle_for(template)
        a = llm.generate(bundle, mock_llm)
        b = llm.generate(bundle, mock_llm)
        assert a.raw_text == b.raw_text

    def test_estimated_usage_when_backend_silent(self, mock_llm):
        template = templates.builtin_templates()[1]
        bundle = bundle_for(template)
        result = llm.generate(bundle, mock_llm)
        assert result.token_usage[0] == llm.estimate_tokens(bundle.system_text) + llm.estimate_tokens(bundle.user_text)
        assert result.token_usage[1] == llm.estimate_tokens(result.raw_text)


class TestEstimateTokens:
    def test_empty(self):
        assert llm.estimate_tokens("") == 0

    def test_400_bytes(self):
        assert llm.estimate_tokens("a" * 400) == 100

    @given(st.text(max_size=500))
    def test_matches_formula(self, text):
        import math

        assert llm.estimate_tokens(text) == math.ceil(len(text.encode("utf-8")) / 4)


class TestHttpBackend:
    def _backend(self, url, **kw):
        kw.setdefault("timeout_s", 5)
        return llm.LlmBackendDescriptor(
            backend_id="http-llm", kind="http_chat", model_id="gpt-test",
            endpoint=url, backoff_base_s=0.0, **kw,
        )

    def test_reported_usage_passes_through(self):
        completion = {
            "choices": [{"message": {"content": "## Narrative\nAll good."}}],
            "usage": {"prompt_tokens": 812, "completion_tokens": 240},
        }
        stub = StubServer(lambda m, p, b: (200, completion))
        try:
            template = templates.builtin_templates()[1]
            bundle = bundle_for(template)
            result = llm.generate(
                bundle, self._backend(stub.url + "/v1/chat/completions"),
                parse=lambda raw: templates.parse_sections(raw, template),
            )
            assert result.token_usage == (812, 240)
            assert result.parsed_sections == (("Narrative", "All good."),)
        finally:
            stub.close()

    def test_unreachable_after_retries(self):
        template = templates.builtin_templates()[1]
        bundle = bundle_for(template)
        attempts = []
        backend = self._backend("http://127.0.0.1:9/v1/chat/completions",
                                timeout_s=0.2, max_retries=2)
        with pytest.raises(BackendUnavailable):
            llm.generate(bundle, backend, attempt_log=attempts)
        assert attempts == [1, 2, 3]

    def test_malformed_output_repaired_once_then_fails(self):
        # backend always answers without the required section marker
        stub = StubServer(
            lambda m, p, b: (200, {"choices": [{"message": {"content": "no markers here"}}]})
        )
        try:
            template = templates.builtin_templates()[1]
            bundle = bundle_for(template)
            with pytest.raises(MalformedOutput):
                llm.generate(
                    bundle, self._backend(stub.url),
                    parse=lambda raw: templates.parse_sections(raw, template),
                )
            assert len(stub.requests) == 2  # exactly one repair re-prompt
            assert b"did not follow the required format" in stub.requests[1][2]
        finally:
            stub.close()

    def test_repair_success_on_second_answer(self):
        answers = ["garbage", "## Narrative\nfixed"]

        def responder(m, p, b):
            return (200, {"choices": [{"message": {"content": answers.pop(0)}}]})

        stub = StubServer(responder)
        try:
            template = templates.builtin_templates()[1]
            bundle = bundle_for(template)
            result = llm.generate(
                bundle, self._backend(stub.url),
                parse=lambda raw: templates.parse_sections(raw, template),
            )
            assert result.parsed_sections == (("Narrative", "fixed"),)
        finally:
            stub.close()

    def test_context_overflow(self):
        template = templates.builtin_templates()[1]
        bundle = bundle_for(template, transcript_text="word " * 5000)
        backend = self._backend("http://127.0.0.1:9/", context_limit_tokens=100)
        with pytest.raises(ContextOverflow):
            llm.generate(bundle, backend)


class TestHealthCheck:
    def test_mock_healthy(self, mock_llm):
        assert llm.health_check(mock_llm).healthy

    def test_unreachable(self):
        backend = llm.LlmBackendDescriptor(
            backend_id="b", kind="http_chat", model_id="m",
            endpoint="http://127.0.0.1:9/v1/chat/completions", timeout_s=0.2,
        )
        health = llm.health_check(backend)
        assert not health.healthy
        assert "connection" in health.reason

    def test_stub_models_listing(self):
        stub = StubServer(lambda m, p, b: (200, {"data": [{"id": "gpt-test"}]}))
        try:
            backend = llm.LlmBackendDescriptor(
                backend_id="b", kind="http_chat", model_id="gpt-test",
                endpoint=stub.url + "/v1/chat/completions", timeout_s=5,
            )
            assert llm.health_check(backend).healthy
            assert stub.requests[0][1] == "/v1/models"
        finally:
            stub.close()

    def test_descriptor_validation(self):
        bad = llm.LlmBackendDescriptor(backend_id="b", kind="http_chat", model_id="m", temperature=3.0)
        assert len(bad.check()) == 2
        good = llm.LlmBackendDescriptor(backend_id="b", kind="mock", model_id="m")
        assert good.check() == []
