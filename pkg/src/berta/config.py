"""Service configuration: one JSON file plus BERTA_-prefixed env overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .asr import AsrBackendDescriptor, VocabularyLexicon
from .errors import ConfigInvalid
from .llm import LlmBackendDescriptor

AUTH_MODES = ("static_token", "oidc_stub", "none_dev")

# env var -> top-level config key
ENV_OVERRIDES = {
    "BERTA_STORAGE_ROOT": "storage_root",
    "BERTA_AUTH_MODE": "auth_mode",
    "BERTA_LISTEN_HOST": "listen_host",
    "BERTA_LISTEN_PORT": "listen_port",
    "BERTA_ASR_BACKEND": "asr_backend",
    "BERTA_LLM_BACKEND": "llm_backend",
    "BERTA_LLM_ENDPOINT": "llm_endpoint",
    "BERTA_ASR_ENDPOINT": "asr_endpoint",
    "BERTA_MAX_UPLOAD_BYTES": "max_upload_bytes",
    "BERTA_DEV_MODE": "dev_mode",
}


@dataclass
class ApiConfig:
    storage_root: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8700
    auth_mode: str = "static_token"
    dev_mode: bool = False
    static_tokens: Dict[str, str] = field(default_factory=dict)
    oidc_verification_key: Optional[str] = None
    max_upload_bytes: int = 200 * 1024 * 1024
    transcription_workers: int = 4
    generation_workers: int = 4
    asr_backends: List[AsrBackendDescriptor] = field(default_factory=list)
    llm_backends: List[LlmBackendDescriptor] = field(default_factory=list)
    asr_backend: Optional[str] = None  # backend_id to use; default first
    llm_backend: Optional[str] = None
    lexicon: VocabularyLexicon = field(default_factory=VocabularyLexicon)
    users: List[Dict[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        if self.auth_mode not in AUTH_MODES:
            raise ConfigInvalid(f"unknown auth_mode {self.auth_mode!r}")
        if self.auth_mode == "none_dev" and not self.dev_mode:
            raise ConfigInvalid("auth_mode none_dev requires dev_mode: true")
        if not self.asr_backends:
            raise ConfigInvalid("at least one ASR backend must be configured")
        if not self.llm_backends:
            raise ConfigInvalid("at least one LLM backend must be configured")
        for b in self.asr_backends + self.llm_backends:
            problems = b.check()
            if problems:
                raise ConfigInvalid(f"backend {b.backend_id}: {'; '.join(problems)}")
        problems = self.lexicon.check()
        if problems:
            raise ConfigInvalid(f"lexicon: {'; '.join(problems)}")
        if self.auth_mode == "static_token" and not self.static_tokens:
            raise ConfigInvalid("static_token mode needs at least one token")
        if self.auth_mode == "oidc_stub" and not self.oidc_verification_key:
            raise ConfigInvalid("oidc_stub mode needs oidc_verification_key")
        if self.max_upload_bytes <= 0:
            raise ConfigInvalid("max_upload_bytes must be positive")

    def active_asr(self) -> AsrBackendDescriptor:
        return _pick(self.asr_backends, self.asr_backend)

    def active_llm(self) -> LlmBackendDescriptor:
        return _pick(self.llm_backends, self.llm_backend)


def _pick(backends, wanted_id):
    if wanted_id is None:
        return backends[0]
    for b in backends:
        if b.backend_id == wanted_id:
            return b
    raise ConfigInvalid(f"no configured backend with id {wanted_id!r}")


def _apply_env(data: dict, env: Dict[str, str]) -> dict:
    for var, key in ENV_OVERRIDES.items():
        if var not in env:
            continue
        raw = env[var]
        if key in ("listen_port", "max_upload_bytes"):
            data[key] = int(raw)
        elif key == "dev_mode":
            data[key] = raw.lower() in ("1", "true", "yes")
        else:
            data[key] = raw
    return data


def load_config(path: Optional[str] = None, env: Optional[Dict[str, str]] = None) -> ApiConfig:
    env = dict(os.environ if env is None else env)
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    data = _apply_env(data, env)

    asr_endpoint = data.pop("asr_endpoint", None)
    llm_endpoint = data.pop("llm_endpoint", None)
    asr_backends = [AsrBackendDescriptor(**b) for b in data.pop("asr_backends", [])]
    llm_backends = [LlmBackendDescriptor(**b) for b in data.pop("llm_backends", [])]
    if asr_endpoint:
        asr_backends = [
            b if b.kind != "http_transcription" else AsrBackendDescriptor(
                **{**b.__dict__, "endpoint": asr_endpoint}
            )
            for b in asr_backends
        ]
    if llm_endpoint:
        llm_backends = [
            b if b.kind != "http_chat" else LlmBackendDescriptor(
                **{**b.__dict__, "endpoint": llm_endpoint}
            )
            for b in llm_backends
        ]
    lexicon = VocabularyLexicon(
        entries=tuple(tuple(e) for e in data.pop("lexicon", []))
    )
    storage_root = data.pop("storage_root", None)
    if storage_root is None:
        raise ConfigInvalid("storage_root is required")
    try:
        return ApiConfig(
            storage_root=storage_root,
            asr_backends=asr_backends,
            llm_backends=llm_backends,
            lexicon=lexicon,
            **data,
        )
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc


def dev_config(storage_root: str, sidecar_dir: Optional[str] = None) -> ApiConfig:
    """All-mock configuration for demos and tests."""
    return ApiConfig(
        storage_root=storage_root,
        auth_mode="none_dev",
        dev_mode=True,
        asr_backends=[
            AsrBackendDescriptor(
                backend_id="mock-asr", kind="mock", model_id="mock-asr-1",
                sidecar_dir=sidecar_dir,
            )
        ],
        llm_backends=[
            LlmBackendDescriptor(backend_id="mock-llm", kind="mock", model_id="mock-llm-1")
        ],
    )
