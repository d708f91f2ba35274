"""Uniform chat-completion interface for note generation.

Two backend kinds: ``mock`` (deterministic; emits each requested section
header followed by the first ten words of the transcript) and ``http_chat``
(chat-completions-style JSON over HTTP, which covers local engines and hosted
endpoints alike).
"""

from __future__ import annotations

import math
import re
import threading
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import httpx

from .errors import BackendRejected, BackendUnavailable, ContextOverflow

SECTION_MARKER_RE = re.compile(r"^## (.+?)\s*$", re.MULTILINE)
TRANSCRIPT_BLOCK_RE = re.compile(
    r"^Transcript \d+:\n(.*?)(?=^Transcript \d+:|^Additional context:|\Z)",
    re.MULTILINE | re.DOTALL,
)


@dataclass(frozen=True)
class LlmBackendDescriptor:
    backend_id: str
    kind: str  # mock | http_chat
    model_id: str
    endpoint: Optional[str] = None
    api_key: Optional[str] = None
    max_output_tokens: int = 1500
    temperature: float = 0.2
    timeout_s: float = 60.0
    max_retries: int = 2
    backoff_base_s: float = 0.5
    concurrency_cap: int = 8
    context_limit_tokens: int = 128000

    def check(self) -> List[str]:
        problems = []
        if self.kind not in ("mock", "http_chat"):
            problems.append(f"unknown backend kind {self.kind!r}")
        if (self.kind == "http_chat") != (self.endpoint is not None):
            problems.append("endpoint required iff kind is http_chat")
        if self.max_output_tokens <= 0:
            problems.append("max_output_tokens must be positive")
        if not 0 <= self.temperature <= 2:
            problems.append("temperature outside [0, 2]")
        return problems


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    template_id: str
    transcript_ids: Tuple[str, ...]


@dataclass(frozen=True)
class GenerationResult:
    raw_text: str
    parsed_sections: Tuple[Tuple[str, str], ...]
    token_usage: Tuple[int, int]  # (prompt_tokens, completion_tokens)
    latency_ms: float


@dataclass(frozen=True)
class Health:
    healthy: bool
    reason: Optional[str] = None


_semaphores: Dict[str, threading.BoundedSemaphore] = {}
_sem_lock = threading.Lock()


def _backend_slot(backend_id: str, cap: int) -> threading.BoundedSemaphore:
    with _sem_lock:
        if backend_id not in _semaphores:
            _semaphores[backend_id] = threading.BoundedSemaphore(cap)
        return _semaphores[backend_id]


def estimate_tokens(text: str) -> int:
    """Deterministic fallback when a backend omits usage: ceil(bytes / 4)."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def _mock_complete(bundle: PromptBundle) -> str:
    titles = SECTION_MARKER_RE.findall(bundle.user_text)
    transcript_words: List[str] = []
    for block in TRANSCRIPT_BLOCK_RE.findall(bundle.user_text):
        transcript_words.extend(block.split())
    snippet = " ".join(transcript_words[:10])
    lines = []
    for title in titles:
        lines.append(f"## {title}")
        lines.append(snippet if snippet else "No dictation captured.")
    return "\n".join(lines)


def _http_complete(bundle: PromptBundle, backend: LlmBackendDescriptor, attempt_log) -> Tuple[str, Optional[Tuple[int, int]]]:
    headers = {"Content-Type": "application/json"}
    if backend.api_key:
        headers["Authorization"] = f"Bearer {backend.api_key}"
    body = {
        "model": backend.model_id,
        "messages": [
            {"role": "system", "content": bundle.system_text},
            {"role": "user", "content": bundle.user_text},
        ],
        "temperature": backend.temperature,
        "max_tokens": backend.max_output_tokens,
    }

    def call():
        with httpx.Client(timeout=backend.timeout_s) as client:
            resp = client.post(backend.endpoint, json=body, headers=headers)
        if resp.status_code != 200:
            raise BackendRejected(
                f"{backend.backend_id}: HTTP {resp.status_code}: {resp.text[:500]}"
            )
        return resp.json()

    last_exc = None
    for attempt in range(1, backend.max_retries + 2):
        if attempt_log is not None:
            attempt_log.append(attempt)
        try:
            payload = call()
            break
        except (httpx.TimeoutException, httpx.ConnectError, httpx.NetworkError) as exc:
            last_exc = exc
            if attempt <= backend.max_retries:
                time.sleep(backend.backoff_base_s * (2 ** (attempt - 1)))
    else:
        raise BackendUnavailable(
            f"{backend.backend_id}: {last_exc} after {backend.max_retries + 1} attempts"
        ) from last_exc

    text = payload["choices"][0]["message"]["content"]
    usage = payload.get("usage")
    reported = None
    if usage and "prompt_tokens" in usage and "completion_tokens" in usage:
        reported = (int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
    return text, reported


def generate(
    bundle: PromptBundle,
    backend: LlmBackendDescriptor,
    parse=None,
    attempt_log: Optional[List[int]] = None,
) -> GenerationResult:
    """Run one completion and parse it per the section output contract.

    ``parse`` is the section parser bound to the note template (see the
    template engine); when it rejects the output, the backend is re-prompted
    once with the malformed text and the contract restated, then the parser's
    error propagates.
    """
    prompt_tokens_est = estimate_tokens(bundle.system_text) + estimate_tokens(bundle.user_text)
    if prompt_tokens_est > backend.context_limit_tokens:
        raise ContextOverflow(
            f"prompt ~{prompt_tokens_est} tokens exceeds limit {backend.context_limit_tokens}"
        )
    slot = _backend_slot(backend.backend_id, backend.concurrency_cap)
    start = time.monotonic()
    with slot:
        if backend.kind == "mock":
            raw, reported = _mock_complete(bundle), None
        elif backend.kind == "http_chat":
            raw, reported = _http_complete(bundle, backend, attempt_log)
        else:
            raise BackendRejected(f"unknown backend kind {backend.kind!r}")

        sections = None
        if parse is not None:
            try:
                sections = parse(raw)
            except Exception:
                repair = PromptBundle(
                    system_text=bundle.system_text,
                    user_text=(
                        "Your previous answer did not follow the required format.\n"
                        "Rewrite it so every section appears as a line '## <title>' "
                        "followed by its body, with all sections present in order.\n\n"
                        "Previous answer:\n" + raw + "\n\nOriginal request:\n" + bundle.user_text
                    ),
                    template_id=bundle.template_id,
                    transcript_ids=bundle.transcript_ids,
                )
                if backend.kind == "mock":
                    raw, reported = _mock_complete(repair), None
                else:
                    raw, reported = _http_complete(repair, backend, attempt_log)
                sections = parse(raw)  # second failure raises MalformedOutput
    latency_ms = (time.monotonic() - start) * 1000.0

    if reported is not None:
        usage = reported  # backend-reported counts pass through unchanged
    else:
        usage = (prompt_tokens_est, estimate_tokens(raw))
    return GenerationResult(
        raw_text=raw,
        parsed_sections=tuple(sections) if sections is not None else (),
        token_usage=usage,
        latency_ms=latency_ms,
    )


def health_check(backend: LlmBackendDescriptor) -> Health:
    if backend.kind == "mock":
        return Health(healthy=True)
    try:
        probe_url = backend.endpoint.rsplit("/chat/completions", 1)[0] + "/models" \
            if backend.endpoint.endswith("/chat/completions") else backend.endpoint
        headers = {}
        if backend.api_key:
            headers["Authorization"] = f"Bearer {backend.api_key}"
        with httpx.Client(timeout=backend.timeout_s) as client:
            resp = client.get(probe_url, headers=headers)
        if resp.status_code < 500:
            return Health(healthy=True)
        return Health(healthy=False, reason=f"HTTP {resp.status_code}")
    except httpx.HTTPError as exc:
        return Health(healthy=False, reason=f"connection: {exc.__class__.__name__}")
